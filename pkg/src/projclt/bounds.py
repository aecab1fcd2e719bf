"""Explicit Gaussian-approximation error bounds for rank-k projections.

Six bound assemblies are provided.  Writing N4 = sum_i ||theta_i||_4^2,
N3 = sum_i ||theta_i||_3^3, L4 = (sum_i ||theta_i||_4)^2, and using the
test-function seminorms of :mod:`projclt.testfuncs`:

  T1 (i.i.d., orthonormal directions)
      sqrt(k)/2 * grad_sup * sqrt(EX^4 - 1) * N4
      + 4/3 * k^2 * g2 * E|X|^3 * N3

  T2 (independent, orthonormal) -- T1 with worst-coordinate moments.

  T3 (independent, linearly independent unit directions)
      1/2 * sqrt(lam k) * grad_sup * sqrt(max EX^4 - 1) * N4
      + 4/3 * lam * k^2 * hess_op_sup * max E|X|^3 * N3,
      lam the largest eigenvalue of the Gram matrix; the comparison
      Gaussian has the Gram matrix as covariance.

  T4 (exchangeable, centered orthonormal directions; constants a, b, c)
      a * k * g1 * (sqrt|E X1X2X3X4| + sqrt|E (X1^2-1)(X2^2-1)|)
      + b * g1 * sqrt(EX^4) * L4
      + c * k^2 * g2 * E|X|^3 * N3

  T5 (exchangeable, linearly independent centered directions)
      T4 with sqrt(lam) on the first two terms and lam on the third,
      grad_sup replacing g1 and hess_op_sup replacing g2.

  abstract (any exchangeable pair satisfying the linearity and
  conditional-second-moment hypotheses with constant lam and errors E_ij)
      min( g1/(2 lam) * sum_ij E|E_ij|,
           sqrt(k) grad_sup/(2 lam) * E sqrt(sum_ij E_ij^2) )
      + k^2 g2/(6 lam) * sum_i E|dX_i|^3

The constants a, b, c of T4/T5 are genuinely unspecified; the defaults
below come from a conservative accounting of the transposition-pair
error terms (see README) and are configuration, not sharp values.

Every report decomposes its total into a fourth-moment term, a
third-moment term, and a mixed-moment term (zero outside T4/T5), with
``total`` equal to their sum exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .directions import ORTHONORMAL_KINDS, GramData, NormSummary
from .errors import InvalidInputError, InvalidMomentsError
from .sources import MomentSummary
from .testfuncs import TestFunction

THEOREMS = ("T1", "T2", "T3", "T4", "T5", "abstract")

MIN_BRANCH_ABS = "sum-abs"
MIN_BRANCH_SQ = "sqrt-sum-sq"


@dataclass(frozen=True, eq=False)
class BoundReport:
    """One evaluated bound with its term decomposition and input echo."""

    theorem: str
    term_fourth: float
    term_third: float
    term_mixed: float
    total: float
    inputs_echo: dict = field(default_factory=dict)
    min_branch: Optional[str] = None


@dataclass(frozen=True)
class ExchangeableConstants:
    """The three absolute constants of the exchangeable-case bounds."""

    a: float = 1.0
    b: float = 12.0
    c: float = 16.0 / 3.0

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise InvalidInputError("exchangeable constants must be positive")


DEFAULT_EXCHANGEABLE_CONSTANTS = ExchangeableConstants()

UNIT_CONSTANTS = ExchangeableConstants(a=1.0, b=1.0, c=1.0)


class EijStats(NamedTuple):
    """Conditional-second-moment error statistics feeding the abstract bound.

    ``sum_abs`` estimates sum_ij E|E_ij|; ``sqrt_sum_sq`` estimates
    E (sum_ij E_ij^2)^(1/2).  Either may be ``inf`` when unknown, which
    simply removes that branch of the min.
    """

    sum_abs: float
    sqrt_sum_sq: float


def _report(theorem, term_fourth, term_third, term_mixed, echo, min_branch=None) -> BoundReport:
    total = term_fourth + term_third + term_mixed
    return BoundReport(
        theorem=theorem,
        term_fourth=term_fourth,
        term_third=term_third,
        term_mixed=term_mixed,
        total=total,
        inputs_echo=echo,
        min_branch=min_branch,
    )


def _check_k(k: int, norms: NormSummary) -> None:
    if k < 1:
        raise InvalidInputError(f"need at least one direction, got k={k}")
    if k != norms.k:
        raise InvalidInputError(f"k={k} does not match norm summary (k={norms.k})")


def _require_orthonormal(norms: NormSummary) -> None:
    if norms.kind not in ORTHONORMAL_KINDS:
        raise InvalidInputError(
            f"this bound requires orthonormal directions, got kind={norms.kind!r}"
        )


def _require_centered(norms: NormSummary) -> None:
    if not norms.centered:
        raise InvalidInputError("this bound requires directions whose rows sum to zero")


def _sqrt_excess_fourth(fourth: float) -> float:
    if fourth < 1.0 - 1e-12:
        raise InvalidMomentsError(f"EX^4 = {fourth} < 1 contradicts EX^2 = 1")
    return math.sqrt(max(fourth - 1.0, 0.0))


def _hess_or_fallback(f: TestFunction, k: int, echo: dict) -> float:
    # Hilbert-Schmidt estimate ||H||_op <= k * g2 when no operator sup is known.
    if f.hess_op_sup is not None:
        return f.hess_op_sup
    echo["hess_fallback"] = True
    return k * f.g2


def _echo(theorem, norms, m, g, **extra) -> dict:
    echo = {
        "theorem": theorem,
        "n": norms.n if norms is not None else None,
        "k": g.dimension,
        "lambda": None,
        "g1": g.g1,
        "g2": g.g2,
        "grad_sup": g.grad_sup,
        "hess_op_sup": g.hess_op_sup,
    }
    if norms is not None:
        echo.update(
            sum_l4_sq=norms.sum_l4_sq,
            sum_l3_cubed=norms.sum_l3_cubed,
            sum_l4_all_sq=norms.sum_l4_all_sq,
            kind=norms.kind,
        )
    if m is not None:
        echo.update(
            abs3=m.abs3, fourth=m.fourth, abs3_max=m.abs3_max, fourth_max=m.fourth_max,
            mixed_4=m.mixed_4, mixed_var=m.mixed_var,
        )
    echo.update(extra)
    return echo


def bound_iid(k: int, norms: NormSummary, m: MomentSummary, g: TestFunction) -> BoundReport:
    """Bound for i.i.d. coordinates projected onto orthonormal directions."""
    _check_k(k, norms)
    _require_orthonormal(norms)
    term_fourth = (
        0.5 * math.sqrt(k) * g.grad_sup * _sqrt_excess_fourth(m.fourth) * norms.sum_l4_sq
    )
    term_third = (4.0 / 3.0) * k * k * g.g2 * m.abs3 * norms.sum_l3_cubed
    return _report("T1", term_fourth, term_third, 0.0, _echo("T1", norms, m, g))


def bound_indep(k: int, norms: NormSummary, m: MomentSummary, g: TestFunction) -> BoundReport:
    """As ``bound_iid`` with worst-coordinate moments (independent, not
    necessarily identical, coordinates)."""
    _check_k(k, norms)
    _require_orthonormal(norms)
    term_fourth = (
        0.5 * math.sqrt(k) * g.grad_sup * _sqrt_excess_fourth(m.fourth_max) * norms.sum_l4_sq
    )
    term_third = (4.0 / 3.0) * k * k * g.g2 * m.abs3_max * norms.sum_l3_cubed
    return _report("T2", term_fourth, term_third, 0.0, _echo("T2", norms, m, g))


def bound_linind(
    k: int, norms: NormSummary, gramdata: GramData, m: MomentSummary, f: TestFunction
) -> BoundReport:
    """Bound for linearly independent unit directions; the comparison
    Gaussian carries the Gram matrix as covariance."""
    _check_k(k, norms)
    if gramdata.C.shape != (k, k):
        raise InvalidInputError("Gram matrix does not match k")
    if max(abs(gramdata.C[i, i] - 1.0) for i in range(k)) > 1e-10:
        raise InvalidInputError("directions must have unit norm (Gram diagonal != 1)")
    lam = gramdata.lambda_max
    echo = _echo("T3", norms, m, f)
    echo["lambda"] = lam
    hess = _hess_or_fallback(f, k, echo)
    term_fourth = (
        0.5 * math.sqrt(lam * k) * f.grad_sup
        * _sqrt_excess_fourth(m.fourth_max) * norms.sum_l4_sq
    )
    term_third = (4.0 / 3.0) * lam * k * k * hess * m.abs3_max * norms.sum_l3_cubed
    return _report("T3", term_fourth, term_third, 0.0, echo)


def _require_mixed(m: MomentSummary) -> tuple[float, float]:
    if m.mixed_4 is None or m.mixed_var is None:
        raise InvalidMomentsError(
            "exchangeable bounds need the mixed moments E X1X2X3X4 and E (X1^2-1)(X2^2-1)"
        )
    return m.mixed_4, m.mixed_var


def bound_exch(
    k: int,
    norms: NormSummary,
    m: MomentSummary,
    g: TestFunction,
    constants: ExchangeableConstants = DEFAULT_EXCHANGEABLE_CONSTANTS,
) -> BoundReport:
    """Bound for a finite exchangeable sequence projected onto centered
    orthonormal directions (rows summing to zero)."""
    _check_k(k, norms)
    _require_orthonormal(norms)
    _require_centered(norms)
    mixed_4, mixed_var = _require_mixed(m)
    echo = _echo("T4", norms, m, g, constants=(constants.a, constants.b, constants.c))
    term_mixed = constants.a * k * g.g1 * (math.sqrt(abs(mixed_4)) + math.sqrt(abs(mixed_var)))
    term_fourth = constants.b * g.g1 * math.sqrt(m.fourth) * norms.sum_l4_all_sq
    term_third = constants.c * k * k * g.g2 * m.abs3 * norms.sum_l3_cubed
    return _report("T4", term_fourth, term_third, term_mixed, echo)


def bound_exch_linind(
    k: int,
    norms: NormSummary,
    gramdata: GramData,
    m: MomentSummary,
    g: TestFunction,
    constants: ExchangeableConstants = DEFAULT_EXCHANGEABLE_CONSTANTS,
) -> BoundReport:
    """Exchangeable bound for linearly independent centered directions."""
    _check_k(k, norms)
    _require_centered(norms)
    if gramdata.C.shape != (k, k):
        raise InvalidInputError("Gram matrix does not match k")
    mixed_4, mixed_var = _require_mixed(m)
    lam = gramdata.lambda_max
    echo = _echo("T5", norms, m, g, constants=(constants.a, constants.b, constants.c))
    echo["lambda"] = lam
    hess = _hess_or_fallback(g, k, echo)
    sqrt_lam = math.sqrt(lam)
    term_mixed = (
        constants.a * k * sqrt_lam * g.grad_sup
        * (math.sqrt(abs(mixed_4)) + math.sqrt(abs(mixed_var)))
    )
    term_fourth = constants.b * sqrt_lam * g.grad_sup * math.sqrt(m.fourth) * norms.sum_l4_all_sq
    term_third = constants.c * k * k * lam * hess * m.abs3 * norms.sum_l3_cubed
    return _report("T5", term_fourth, term_third, term_mixed, echo)


def bound_abstract(
    lambda_stein: float,
    eij_stats: EijStats,
    third_stats: float,
    g: TestFunction,
    k: int,
) -> BoundReport:
    """Abstract exchangeable-pair bound from measured (or enveloped)
    error statistics.

    ``third_stats`` is sum_i E|X'_i - X_i|^3.  The report records which
    branch of the min was taken.
    """
    if lambda_stein <= 0:
        raise InvalidInputError(f"the linearity constant must be positive, got {lambda_stein}")
    if k < 1:
        raise InvalidInputError(f"need k >= 1, got {k}")
    if min(eij_stats.sum_abs, eij_stats.sqrt_sum_sq, third_stats) < 0:
        raise InvalidInputError("error statistics must be non-negative")
    branch_abs = g.g1 / (2.0 * lambda_stein) * eij_stats.sum_abs
    branch_sq = math.sqrt(k) * g.grad_sup / (2.0 * lambda_stein) * eij_stats.sqrt_sum_sq
    if branch_abs <= branch_sq:
        term_fourth, min_branch = branch_abs, MIN_BRANCH_ABS
    else:
        term_fourth, min_branch = branch_sq, MIN_BRANCH_SQ
    term_third = k * k * g.g2 / (6.0 * lambda_stein) * third_stats
    echo = _echo("abstract", None, None, g,
                 sum_abs_eij=eij_stats.sum_abs,
                 sqrt_sum_sq_eij=eij_stats.sqrt_sum_sq,
                 sum_third=third_stats)
    echo["lambda"] = lambda_stein
    echo["k"] = k
    return _report("abstract", term_fourth, term_third, 0.0, echo, min_branch=min_branch)
