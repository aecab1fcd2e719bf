"""Exchangeable-pair simulation and Monte Carlo bound verification.

Two pair constructions are simulated, matching the mechanisms behind the
independent and exchangeable bounds:

* coordinate resampling -- replace one uniformly chosen coordinate by an
  independent copy; the conditional-mean shrinkage constant is 1/n;
* transposition -- swap two uniformly chosen coordinates of an
  exchangeable vector; the shrinkage constant is 2/(n-1) and requires
  every direction row to sum to zero.

For both, the conditional second-moment errors E_ij have closed forms in
the current state x, checked here against direct enumeration over the
randomization (the replacement law, or all ordered index pairs).  On top
of that sit Monte Carlo estimates of the error statistics feeding the
abstract bound, and the end-to-end check that the measured discrepancy
|E g(S) - E g(Z~)| stays below the assembled bound.

Monte Carlo loops follow the splittable seeding contract of
:mod:`projclt.sources`: state t of a run uses the stream keyed by
``seed XOR t``; bulk estimation uses fixed-size blocks (a block starting
at index i uses ``seed XOR i``), per-block partial sums are combined
with exact float summation, and results are therefore independent of how
blocks are scheduled across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import bounds as bounds_mod
from . import sources
from .directions import ORTHONORMAL_KINDS, DirectionSet, gram, norm_summary
from .errors import InvalidInputError, ProjcltError, WrongPairKindError
from .sources import (
    ExchangeableModel,
    IIDModel,
    IndependentModel,
    Model,
    sample_block,
    sample_vector,
)
from .testfuncs import Expectation, GaussianSpec, TestFunction, gaussian_expectation

RESAMPLING = "resampling"
TRANSPOSITION = "transposition"
PAIR_KINDS = (RESAMPLING, TRANSPOSITION)

# Test hook: scales the shrinkage constant used by the linearity check so a
# deliberately wrong constant is caught by the diagnostics.
_LINEARITY_LAMBDA_SCALE = 1.0

# Fixed Monte Carlo block size; part of the determinism contract.
_BLOCK = 8192

# Inner sub-sample size for third-moment expectations of continuous laws.
_THIRD_SUBSAMPLES = 128


class Estimate(NamedTuple):
    """A Monte Carlo estimate with its standard error."""

    value: float
    se: float


@dataclass(frozen=True)
class PairStats:
    """Measured error statistics of a simulated exchangeable pair."""

    lambda_stein: float
    sum_abs_eij: Estimate
    sqrt_sum_sq_eij: Estimate
    sum_third: Estimate
    samples: int

    def eij_stats(self) -> bounds_mod.EijStats:
        return bounds_mod.EijStats(
            sum_abs=self.sum_abs_eij.value, sqrt_sum_sq=self.sqrt_sum_sq_eij.value
        )


def stein_lambda(pair_kind: str, n: int) -> float:
    """Shrinkage constant of the conditional-mean identity for each pair."""
    if pair_kind == RESAMPLING:
        return 1.0 / n
    if pair_kind == TRANSPOSITION:
        if n < 2:
            raise InvalidInputError("transposition needs n >= 2")
        return 2.0 / (n - 1)
    raise InvalidInputError(f"unknown pair kind {pair_kind!r}")


def project(x: np.ndarray, ds: DirectionSet) -> np.ndarray:
    """S^i = <theta_i, x>."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ds.n,):
        raise InvalidInputError(f"state has shape {x.shape}, directions need ({ds.n},)")
    return ds.vectors @ x


class ResamplePairDraw(NamedTuple):
    s: np.ndarray
    s_prime: np.ndarray
    index: int
    replacement: float


class TransposePairDraw(NamedTuple):
    s: np.ndarray
    s_prime: np.ndarray
    index_i: int
    index_j: int


def _require_independent(model: Model) -> None:
    if not isinstance(model, (IIDModel, IndependentModel)):
        raise WrongPairKindError(
            "coordinate resampling needs independent coordinates; use the "
            "transposition pair for exchangeable models"
        )


def _require_exchangeable(model: Model) -> None:
    if not isinstance(model, ExchangeableModel):
        raise WrongPairKindError("the transposition pair needs an exchangeable model")


def _coord_law(model: Model, index: int) -> IIDModel:
    return model.coords[index] if isinstance(model, IndependentModel) else model


def resample_pair(x, ds: DirectionSet, model: Model, seed: int) -> ResamplePairDraw:
    """One draw of the coordinate-resampling pair from state x."""
    _require_independent(model)
    x = np.asarray(x, dtype=np.float64)
    s = project(x, ds)
    rng = sources.stream(seed)
    index = int(rng.integers(ds.n))
    replacement = float(_coord_law(model, index).sampler(rng, 1)[0])
    s_prime = s + ds.vectors[:, index] * (replacement - x[index])
    return ResamplePairDraw(s=s, s_prime=s_prime, index=index, replacement=replacement)


def transpose_pair(x, ds: DirectionSet, model: Model, seed: int) -> TransposePairDraw:
    """One draw of the transposition pair from state x."""
    _require_exchangeable(model)
    if not ds.is_centered():
        raise InvalidInputError(
            "the transposition pair needs centered directions (rows summing to zero); "
            "its shrinkage identity fails otherwise"
        )
    x = np.asarray(x, dtype=np.float64)
    s = project(x, ds)
    rng = sources.stream(seed)
    n = ds.n
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    delta = (ds.vectors[:, i] - ds.vectors[:, j]) * (x[j] - x[i])
    return TransposePairDraw(s=s, s_prime=s + delta, index_i=i, index_j=j)


# --------------------------------------------------------------------------
# Exact conditional expectations

def _replacement_means(model: Model, n: int) -> np.ndarray:
    """E X*_l per coordinate: enumerated over finite supports, declared 0
    otherwise (every model is standardized)."""
    if isinstance(model, IndependentModel):
        return np.array(
            [
                float(c.support[0] @ c.support[1]) if c.support is not None else 0.0
                for c in model.coords
            ]
        )
    law = model
    mu = float(law.support[0] @ law.support[1]) if law.support is not None else 0.0
    return np.full(n, mu)


def conditional_mean_enumerated(
    x, ds: DirectionSet, model: Model, pair_kind: str
) -> np.ndarray:
    """E[S' - S | x], computed by enumerating the pair randomization.

    Resampling averages over the replaced index (and the replacement
    law); transposition averages over all n(n-1) ordered index pairs.
    """
    x = np.asarray(x, dtype=np.float64)
    n = ds.n
    if pair_kind == RESAMPLING:
        _require_independent(model)
        mu = _replacement_means(model, n)
        return ds.vectors @ (mu - x) / n
    if pair_kind == TRANSPOSITION:
        theta = ds.vectors
        dx = x[None, :] - x[:, None]
        dtheta = theta[:, :, None] - theta[:, None, :]
        return np.einsum("irs,rs->i", dtheta, dx) / (n * (n - 1))
    raise InvalidInputError(f"unknown pair kind {pair_kind!r}")


def conditional_linearity_check(
    ds: DirectionSet, model: Model, pair_kind: str, trials: int, seed: int
) -> float:
    """Worst residual max_i |E[dS^i | x] + lambda S^i| over sampled states.

    The conditional mean is computed exactly (enumeration, or declared
    first moments for continuous replacement laws), so the residual is
    floating-point noise when the shrinkage identity holds; a non-centered
    direction set under transposition yields a macroscopic residual.
    """
    if trials < 1:
        raise InvalidInputError("need at least one trial")
    lam = stein_lambda(pair_kind, ds.n) * _LINEARITY_LAMBDA_SCALE
    worst = 0.0
    for t in range(trials):
        x = sample_vector(model, seed ^ t, n=ds.n)
        s = project(x, ds)
        cond = conditional_mean_enumerated(x, ds, model, pair_kind)
        worst = max(worst, float(np.max(np.abs(cond + lam * s))))
    return worst


def eij_closed_form(x, ds: DirectionSet, pair_kind: str) -> np.ndarray:
    """The conditional second-moment error matrix E_ij(x) in closed form.

    Resampling (orthonormal rows):
        E_ij = (1/n) sum_r theta_i^r theta_j^r (x_r^2 - 1).

    Transposition (centered orthonormal rows), with W = sum x_r,
    V_ij = sum_r theta_i^r theta_j^r x_r^2, T_ij = sum_r theta_i^r theta_j^r x_r:
        E_ij = 2/(n(n-1)) [ delta_ij sum_r (x_r^2 - 1) + n (V_ij - delta_ij)
                            - 2 T_ij W + 2 S^i S^j ].
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ds.n,):
        raise InvalidInputError(f"state has shape {x.shape}, directions need ({ds.n},)")
    theta = ds.vectors
    n = ds.n
    if pair_kind == RESAMPLING:
        if ds.kind not in ORTHONORMAL_KINDS:
            raise InvalidInputError("the resampling closed form assumes orthonormal rows")
        return (theta * (x * x - 1.0)) @ theta.T / n
    if pair_kind == TRANSPOSITION:
        if ds.kind not in ORTHONORMAL_KINDS or not ds.is_centered():
            raise InvalidInputError(
                "the transposition closed form assumes centered orthonormal rows"
            )
        w = float(x.sum())
        s = theta @ x
        x2 = x * x
        v = (theta * x2) @ theta.T
        t = (theta * x) @ theta.T
        eye = np.eye(ds.k)
        e = n * (v - eye) - 2.0 * w * t + 2.0 * np.outer(s, s)
        e += eye * float(np.sum(x2 - 1.0))
        e *= 2.0 / (n * (n - 1))
        return e
    raise InvalidInputError(f"unknown pair kind {pair_kind!r}")


def eij_enumerated(x, ds: DirectionSet, model: Model, pair_kind: str) -> np.ndarray:
    """E[dS^i dS^j | x] - 2 lambda delta_ij by direct enumeration.

    The resampling route needs the per-coordinate replacement second
    moments; finite supports are enumerated, continuous laws use the
    declared standardization (E X* = 0, E X*^2 = 1).
    """
    x = np.asarray(x, dtype=np.float64)
    theta = ds.vectors
    n = ds.n
    lam = stein_lambda(pair_kind, n)
    if pair_kind == RESAMPLING:
        _require_independent(model)
        w = np.empty(n)
        for r in range(n):
            law = _coord_law(model, r)
            if law.support is not None:
                vals, probs = law.support
                w[r] = float(probs @ (vals - x[r]) ** 2)
            else:
                w[r] = 1.0 + x[r] * x[r]
        cond = (theta * w) @ theta.T / n
        return cond - 2.0 * lam * np.eye(ds.k)
    if pair_kind == TRANSPOSITION:
        dx2 = (x[None, :] - x[:, None]) ** 2
        dtheta = theta[:, :, None] - theta[:, None, :]
        cond = np.einsum("irs,jrs,rs->ij", dtheta, dtheta, dx2) / (n * (n - 1))
        return cond - 2.0 * lam * np.eye(ds.k)
    raise InvalidInputError(f"unknown pair kind {pair_kind!r}")


# --------------------------------------------------------------------------
# Pair statistics

def _third_moment_weights(model: Model, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """w_l = E |X*_l - x_l|^3: exact over finite supports, sub-sampled for
    continuous replacement laws."""
    n = x.size
    if isinstance(model, IIDModel) and model.support is not None:
        vals, probs = model.support
        return np.abs(vals[None, :] - x[:, None]) ** 3 @ probs
    if isinstance(model, IIDModel):
        draws = model.sampler(rng, _THIRD_SUBSAMPLES)
        return np.mean(np.abs(draws[None, :] - x[:, None]) ** 3, axis=1)
    w = np.empty(n)
    for r, law in enumerate(model.coords):
        if law.support is not None:
            vals, probs = law.support
            w[r] = float(probs @ np.abs(vals - x[r]) ** 3)
        else:
            draws = law.sampler(rng, _THIRD_SUBSAMPLES)
            w[r] = float(np.mean(np.abs(draws - x[r]) ** 3))
    return w


def _estimate(samples: np.ndarray) -> Estimate:
    m = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    return Estimate(value=m, se=se)


def pair_stats(
    ds: DirectionSet, model: Model, pair_kind: str, samples: int, seed: int
) -> PairStats:
    """Monte Carlo estimates of the abstract bound's error statistics.

    Per sampled state x, E_ij(x) comes from the closed form (it is a
    function of the state), so sum_ij E|E_ij| and E sqrt(sum E_ij^2) are
    plain state averages; the third-moment sum additionally averages over
    the pair randomization (enumerated or sub-sampled).
    """
    if samples < 100:
        raise InvalidInputError(f"pair statistics need at least 100 samples, got {samples}")
    if pair_kind == RESAMPLING:
        _require_independent(model)
    else:
        _require_exchangeable(model)
    n = ds.n
    lam = stein_lambda(pair_kind, n)
    abs_sum = np.empty(samples)
    sq_sqrt = np.empty(samples)
    third = np.empty(samples)
    if pair_kind == TRANSPOSITION:
        dtheta = ds.vectors[:, :, None] - ds.vectors[:, None, :]
        abs_dtheta3 = np.abs(dtheta) ** 3
        abs_dtheta3_sum = abs_dtheta3.sum(axis=0)
    for t in range(samples):
        rng = sources.stream(seed ^ t)
        if isinstance(model, ExchangeableModel):
            x = rng.permutation(model.population)
        elif isinstance(model, IndependentModel):
            x = np.array([c.sampler(rng, 1)[0] for c in model.coords])
        else:
            x = np.asarray(model.sampler(rng, n), dtype=np.float64)
        e = eij_closed_form(x, ds, pair_kind)
        abs_sum[t] = float(np.abs(e).sum())
        sq_sqrt[t] = float(np.sqrt(np.sum(e * e)))
        if pair_kind == RESAMPLING:
            w = _third_moment_weights(model, x, rng)
            abs_theta3 = np.abs(ds.vectors) ** 3
            third[t] = float(abs_theta3.sum(axis=0) @ w) / n
        else:
            dx3 = np.abs(x[None, :] - x[:, None]) ** 3
            third[t] = float(np.sum(abs_dtheta3_sum * dx3)) / (n * (n - 1))
    return PairStats(
        lambda_stein=lam,
        sum_abs_eij=_estimate(abs_sum),
        sqrt_sum_sq_eij=_estimate(sq_sqrt),
        sum_third=_estimate(third),
        samples=samples,
    )


# --------------------------------------------------------------------------
# Discrepancy estimation

@dataclass(frozen=True)
class DiscrepancyEstimate:
    """|mean g(S) - E g(Z~)| with a three-standard-error confidence margin."""

    discrepancy: float
    ci_halfwidth: float
    mean_g: float
    se: float
    gaussian: Expectation
    samples: int


def estimate_discrepancy(
    ds: DirectionSet,
    model: Model,
    g: TestFunction,
    gaussian_spec: GaussianSpec,
    samples: int,
    seed: int,
    workers: Optional[int] = None,
) -> DiscrepancyEstimate:
    """Monte Carlo estimate of |E g(S) - E g(Z~)|.

    Draws are generated in fixed-size blocks (single precision; the
    statistical error at any usable sample count dominates the rounding
    by several orders of magnitude), projected with one matrix product
    per block, and accumulated in double precision with exact summation
    of the per-block partials, so the result does not depend on worker
    count or block order.
    """
    if samples < 1000:
        raise InvalidInputError(f"discrepancy estimation needs >= 1000 samples, got {samples}")
    if g.dimension != ds.k:
        raise InvalidInputError(f"test function dimension {g.dimension} != k = {ds.k}")
    n = ds.n
    if sources.model_dim(model) not in (None, n):
        raise InvalidInputError("model dimension does not match the direction set")
    theta_t = np.ascontiguousarray(ds.vectors.T, dtype=np.float32)
    starts = list(range(0, samples, _BLOCK))

    def run_block(start: int) -> tuple[float, float]:
        count = min(_BLOCK, samples - start)
        x = sample_block(model, seed, start, count, n=n, dtype=np.float32)
        s = (x @ theta_t).astype(np.float64)
        vals = g.evaluate(s)
        return float(vals.sum()), float(np.dot(vals, vals))

    if workers is None:
        workers = min(2, os.cpu_count() or 1)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_block, starts))
    else:
        partials = [run_block(s) for s in starts]

    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    mean = total / samples
    var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
    se = math.sqrt(var / samples)
    gauss = gaussian_expectation(
        g, gaussian_spec, method="auto", seed=sources.derived_seed(seed, 1)
    )
    return DiscrepancyEstimate(
        discrepancy=abs(mean - gauss.value),
        ci_halfwidth=3.0 * se + gauss.error,
        mean_g=mean,
        se=se,
        gaussian=gauss,
        samples=samples,
    )


# --------------------------------------------------------------------------
# End-to-end verification

@dataclass(frozen=True)
class VerificationTask:
    """Everything one verification run needs, already resolved."""

    ds: DirectionSet
    model: Model
    g: TestFunction
    theorem: str
    samples: int
    seed: int
    constants: bounds_mod.ExchangeableConstants = bounds_mod.DEFAULT_EXCHANGEABLE_CONSTANTS
    pair_kind: Optional[str] = None
    pair_samples: int = 2000
    bound_scale: float = 1.0
    digest: str = ""
    workers: Optional[int] = None


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one verification run; ``passed`` is recomputed from the
    other fields on construction."""

    theorem: str
    n: int
    k: int
    samples: int
    discrepancy_estimate: float
    ci_halfwidth: float
    bound_total: float
    bound_report: bounds_mod.BoundReport
    digest: str = ""
    metadata: dict = field(default_factory=dict)
    passed: bool = False

    def __post_init__(self):
        ok = self.discrepancy_estimate <= self.bound_total + self.ci_halfwidth
        object.__setattr__(self, "passed", ok)


def _stage(name: str, fn):
    try:
        return fn()
    except ProjcltError as exc:
        raise type(exc)(f"stage {name!r}: {exc}") from exc


def compute_bound(
    theorem: str,
    ds: DirectionSet,
    model: Model,
    g: TestFunction,
    constants: bounds_mod.ExchangeableConstants = bounds_mod.DEFAULT_EXCHANGEABLE_CONSTANTS,
    pair_kind: Optional[str] = None,
    pair_samples: int = 2000,
    seed: int = 0,
) -> bounds_mod.BoundReport:
    """Evaluate the selected bound for a resolved (directions, model, g)
    triple.  The abstract bound measures its error statistics by
    simulating the pair matching the model."""
    norms = norm_summary(ds)
    m = sources.moment_summary(model)
    k = ds.k
    if theorem == "T1":
        if not isinstance(model, IIDModel):
            raise InvalidInputError("T1 needs an i.i.d. model")
        return bounds_mod.bound_iid(k, norms, m, g)
    if theorem == "T2":
        if not isinstance(model, (IIDModel, IndependentModel)):
            raise InvalidInputError("T2 needs independent coordinates")
        return bounds_mod.bound_indep(k, norms, m, g)
    if theorem == "T3":
        if not isinstance(model, (IIDModel, IndependentModel)):
            raise InvalidInputError("T3 needs independent coordinates")
        return bounds_mod.bound_linind(k, norms, gram(ds), m, g)
    if theorem == "T4":
        return bounds_mod.bound_exch(k, norms, m, g, constants)
    if theorem == "T5":
        return bounds_mod.bound_exch_linind(k, norms, gram(ds), m, g, constants)
    if theorem == "abstract":
        if pair_kind is None:
            pair_kind = TRANSPOSITION if isinstance(model, ExchangeableModel) else RESAMPLING
        stats = pair_stats(ds, model, pair_kind, pair_samples, sources.derived_seed(seed, 2))
        report = bounds_mod.bound_abstract(
            stats.lambda_stein, stats.eij_stats(), stats.sum_third.value, g, k
        )
        report.inputs_echo["n"] = ds.n
        report.inputs_echo["pair_kind"] = pair_kind
        return report
    raise InvalidInputError(f"unknown theorem {theorem!r}")


def gaussian_spec_for(theorem: str, ds: DirectionSet) -> GaussianSpec:
    """Identity covariance for the orthonormal bounds, the Gram matrix for
    the linearly independent ones."""
    if theorem in ("T3", "T5"):
        return GaussianSpec.from_gram(gram(ds))
    return GaussianSpec.identity(ds.k)


def verify_bound(task: VerificationTask) -> VerificationReport:
    """Estimate the discrepancy, evaluate the selected bound, and compare.

    The run passes when the measured discrepancy does not exceed the
    (optionally rescaled) bound plus the confidence margin.
    """
    report = _stage(
        "bound",
        lambda: compute_bound(
            task.theorem, task.ds, task.model, task.g,
            constants=task.constants, pair_kind=task.pair_kind,
            pair_samples=task.pair_samples, seed=task.seed,
        ),
    )
    spec = _stage("gaussian", lambda: gaussian_spec_for(task.theorem, task.ds))
    disc = _stage(
        "discrepancy",
        lambda: estimate_discrepancy(
            task.ds, task.model, task.g, spec, task.samples, task.seed, workers=task.workers
        ),
    )
    bound_total = report.total * task.bound_scale
    metadata = {
        "seed": task.seed,
        "samples": task.samples,
        "mean_g": disc.mean_g,
        "se": disc.se,
        "gaussian_value": disc.gaussian.value,
        "gaussian_error": disc.gaussian.error,
        "gaussian_method": disc.gaussian.method,
        "bound_scale": task.bound_scale,
        "digest": task.digest,
    }
    return VerificationReport(
        theorem=task.theorem,
        n=task.ds.n,
        k=task.ds.k,
        samples=task.samples,
        discrepancy_estimate=disc.discrepancy,
        ci_halfwidth=disc.ci_halfwidth,
        bound_total=bound_total,
        bound_report=report,
        digest=task.digest,
        metadata=metadata,
    )
