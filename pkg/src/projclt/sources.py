"""Random-vector models and the moment constants that enter the bounds.

Three model families are supported, all standardized to mean 0 and
variance 1 per coordinate:

* ``IIDModel``          -- one scalar law used for every coordinate,
* ``IndependentModel``  -- a per-coordinate list of scalar laws,
* ``ExchangeableModel`` -- a uniformly random permutation of a fixed
  standardized population, which makes every mixed moment of the
  dependence terms exactly computable.

Catalog laws ship closed-form third/fourth moments; Monte Carlo is used
only as a cross-check, never to feed a bound.  User-supplied laws must
declare their moments explicitly.

Seeding is splittable and counter-based: draw i of a run uses the stream
keyed by ``seed XOR i`` (Philox), so results do not depend on how an
index range is partitioned across workers.  Bulk sampling works on
blocks of consecutive indices; a block starting at index i consumes the
stream keyed by ``seed XOR i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidInputError, InvalidMomentsError, MissingMomentsError

_KEY_MASK = (1 << 128) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def stream(seed: int) -> np.random.Generator:
    """Counter-based generator for one sampling stream."""
    return np.random.Generator(np.random.Philox(key=seed & _KEY_MASK))


def derived_seed(seed: int, tag: int) -> int:
    """Decorrelated child seed for an auxiliary purpose within one run."""
    return (seed * _GOLDEN64 + 0x632BE59BD9B4E019 * (tag + 1)) & ((1 << 64) - 1)


@dataclass(frozen=True)
class MomentSummary:
    """Distributional constants consumed by the error bounds.

    ``abs3``/``fourth`` refer to the first coordinate; the ``_max``
    fields take the worst coordinate (they coincide for i.i.d. models).
    The mixed moments E X1 X2 X3 X4 and E (X1^2-1)(X2^2-1) are present
    exactly when the model is exchangeable.
    """

    abs3: float
    fourth: float
    abs3_max: float
    fourth_max: float
    mixed_4: Optional[float] = None
    mixed_var: Optional[float] = None

    def __post_init__(self):
        for name in ("abs3", "fourth", "abs3_max", "fourth_max"):
            val = getattr(self, name)
            if val < 1.0 - 1e-9:
                raise InvalidMomentsError(
                    f"{name}={val} < 1 is impossible for a variable with EX^2 = 1"
                )
        if (self.mixed_4 is None) != (self.mixed_var is None):
            raise InvalidMomentsError("mixed_4 and mixed_var must be supplied together")


Sampler = Callable[[np.random.Generator, object, type], np.ndarray]


@dataclass(frozen=True, eq=False)
class IIDModel:
    """A standardized scalar law: sampler plus declared moment constants.

    ``support`` carries (values, probabilities) for finitely supported
    laws; exact conditional expectations enumerate it directly.
    """

    name: str
    sampler: Sampler
    abs3: Optional[float]
    fourth: Optional[float]
    support: Optional[tuple[np.ndarray, np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class IndependentModel:
    """Independent coordinates, one scalar law each."""

    coords: tuple[IIDModel, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise InvalidInputError("independent model needs at least one coordinate")

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True, eq=False)
class ExchangeableModel:
    """Uniformly random permutation of a fixed standardized population."""

    population: np.ndarray

    def __post_init__(self):
        pop = np.ascontiguousarray(np.asarray(self.population, dtype=np.float64))
        if pop.ndim != 1 or pop.size < 2:
            raise InvalidInputError("population must hold at least two values")
        n = pop.size
        if abs(pop.sum()) > 1e-12 or abs(float(pop @ pop) - n) > 1e-12:
            raise InvalidInputError(
                "population must be standardized: sum a_r = 0 and sum a_r^2 = n "
                "(use standardize_population)"
            )
        pop.flags.writeable = False
        object.__setattr__(self, "population", pop)

    @property
    def n(self) -> int:
        return self.population.size


Model = Union[IIDModel, IndependentModel, ExchangeableModel]


# --------------------------------------------------------------------------
# Catalog laws

def _sample_rademacher(rng, size, dtype=np.float64):
    total = int(np.prod(size))
    raw = rng.bytes((total + 7) // 8)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=total)
    out = bits.astype(dtype)
    out *= 2.0
    out -= 1.0
    return out.reshape(size)


def rademacher() -> IIDModel:
    """Uniform on {-1, +1}: E|X|^3 = EX^4 = 1."""
    support = (np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
    return IIDModel("rademacher", _sample_rademacher, abs3=1.0, fourth=1.0, support=support)


_SQRT3 = math.sqrt(3.0)


def _sample_uniform(rng, size, dtype=np.float64):
    out = rng.random(size, dtype=dtype)
    out *= 2.0 * _SQRT3
    out -= _SQRT3
    return out


def uniform() -> IIDModel:
    """Uniform on [-sqrt(3), sqrt(3)]: E|X|^3 = 3 sqrt(3)/4, EX^4 = 9/5."""
    return IIDModel("uniform", _sample_uniform, abs3=3.0 * _SQRT3 / 4.0, fourth=9.0 / 5.0)


def two_point(p: float = 0.2) -> IIDModel:
    """Two-point law with P(X = sqrt(q/p)) = p, P(X = -sqrt(p/q)) = q = 1-p."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"two_point needs 0 < p < 1, got {p}")
    q = 1.0 - p
    hi = math.sqrt(q / p)
    lo = -math.sqrt(p / q)

    def sample(rng, size, dtype=np.float64):
        u = rng.random(size, dtype=dtype)
        return np.where(u < p, dtype(hi), dtype(lo))

    support = (np.array([lo, hi]), np.array([q, p]))
    return IIDModel(
        f"two_point({p!r})",
        sample,
        abs3=p * hi**3 + q * (-lo) ** 3,
        fourth=p * hi**4 + q * lo**4,
        support=support,
    )


def _sample_exponential(rng, size, dtype=np.float64):
    out = rng.standard_exponential(size, dtype=dtype)
    out -= 1.0
    return out


def centered_exponential() -> IIDModel:
    """Exp(1) minus its mean: E|X|^3 = 12/e - 2, EX^4 = 9."""
    return IIDModel(
        "exponential", _sample_exponential, abs3=12.0 / math.e - 2.0, fourth=9.0
    )


CATALOG: dict[str, Callable[[], IIDModel]] = {
    "rademacher": rademacher,
    "uniform": uniform,
    "two_point": two_point,
    "exponential": centered_exponential,
}


def user_model(name, sampler, abs3=None, fourth=None, support=None) -> IIDModel:
    """Wrap a user-supplied standardized sampler; moments must be declared
    before the model can feed a bound."""
    return IIDModel(name, sampler, abs3=abs3, fourth=fourth, support=support)


# --------------------------------------------------------------------------
# Moment constants

def iid_moments(model: IIDModel) -> MomentSummary:
    """Declared E|X|^3 and EX^4 of a scalar law."""
    if model.abs3 is None or model.fourth is None:
        raise MissingMomentsError(
            f"model {model.name!r} does not declare abs3/fourth; bounds refuse to "
            "estimate constants that enter a proved inequality"
        )
    return MomentSummary(
        abs3=model.abs3, fourth=model.fourth, abs3_max=model.abs3, fourth_max=model.fourth
    )


def independent_moments(model: IndependentModel) -> MomentSummary:
    per = [iid_moments(c) for c in model.coords]
    return MomentSummary(
        abs3=per[0].abs3,
        fourth=per[0].fourth,
        abs3_max=max(m.abs3 for m in per),
        fourth_max=max(m.fourth for m in per),
    )


def exchangeable_moments(model: ExchangeableModel) -> MomentSummary:
    """Exact mixed moments of a random permutation of the population.

    Sampling without replacement turns each mixed moment into a symmetric
    function of the population; everything reduces to power sums
    p_m = sum_r a_r^m:

      E X1 X2 X3 X4      = (p1^4 - 6 p2 p1^2 + 3 p2^2 + 8 p3 p1 - 6 p4) / n(n-1)(n-2)(n-3)
      E X1^2 X2^2        = (p2^2 - p4) / n(n-1)
      E (X1^2-1)(X2^2-1) = E X1^2 X2^2 - 2 p2/n + 1
    """
    a = model.population
    n = model.n
    if n < 4:
        raise InvalidInputError(f"mixed fourth moments need a population of size >= 4, got {n}")
    p1 = float(a.sum())
    p2 = float(a @ a)
    a2 = a * a
    p3 = float(a2 @ a)
    p4 = float(a2 @ a2)
    ordered4 = p1**4 - 6.0 * p2 * p1**2 + 3.0 * p2**2 + 8.0 * p3 * p1 - 6.0 * p4
    mixed_4 = ordered4 / (n * (n - 1) * (n - 2) * (n - 3))
    mixed_var = (p2**2 - p4) / (n * (n - 1)) - 2.0 * p2 / n + 1.0
    return MomentSummary(
        abs3=float(np.mean(np.abs(a) ** 3)),
        fourth=p4 / n,
        abs3_max=float(np.mean(np.abs(a) ** 3)),
        fourth_max=p4 / n,
        mixed_4=mixed_4,
        mixed_var=mixed_var,
    )


def moment_summary(model: Model) -> MomentSummary:
    if isinstance(model, IIDModel):
        return iid_moments(model)
    if isinstance(model, IndependentModel):
        return independent_moments(model)
    if isinstance(model, ExchangeableModel):
        return exchangeable_moments(model)
    raise InvalidInputError(f"unknown model type {type(model).__name__}")


# --------------------------------------------------------------------------
# Sampling

def model_dim(model: Model) -> Optional[int]:
    """Intrinsic vector length, or None for a scalar i.i.d. law."""
    if isinstance(model, IndependentModel):
        return model.n
    if isinstance(model, ExchangeableModel):
        return model.n
    return None


def _resolve_n(model: Model, n: Optional[int]) -> int:
    intrinsic = model_dim(model)
    if intrinsic is not None:
        if n is not None and n != intrinsic:
            raise InvalidInputError(f"model has n={intrinsic}, got n={n}")
        return intrinsic
    if n is None:
        raise InvalidInputError("an i.i.d. scalar law needs an explicit vector length n")
    if n < 1:
        raise InvalidInputError(f"vector length must be positive, got {n}")
    return n


def sample_vector(model: Model, seed: int, n: Optional[int] = None) -> np.ndarray:
    """One draw of the n-dimensional random vector; deterministic given seed.

    Draw i of a run should be requested with ``seed XOR i``.
    """
    n = _resolve_n(model, n)
    rng = stream(seed)
    if isinstance(model, ExchangeableModel):
        return rng.permutation(model.population)
    if isinstance(model, IndependentModel):
        out = np.empty(n)
        for j, coord in enumerate(model.coords):
            out[j] = coord.sampler(rng, 1)[0]
        return out
    return np.asarray(model.sampler(rng, n), dtype=np.float64)


def sample_block(
    model: Model,
    seed: int,
    start: int,
    count: int,
    n: Optional[int] = None,
    dtype=np.float64,
) -> np.ndarray:
    """(count, n) matrix of draws for sample indices start..start+count-1.

    The block consumes the stream keyed by ``seed XOR start``; callers
    that fix their block boundaries therefore get identical totals no
    matter how blocks are distributed across workers.
    """
    n = _resolve_n(model, n)
    if count < 1:
        raise InvalidInputError("block count must be positive")
    rng = stream(seed ^ start)
    if isinstance(model, ExchangeableModel):
        tile = np.tile(model.population.astype(dtype), (count, 1))
        return rng.permuted(tile, axis=1)
    if isinstance(model, IndependentModel):
        out = np.empty((count, n), dtype=dtype)
        for j, coord in enumerate(model.coords):
            out[:, j] = coord.sampler(rng, count, dtype)
        return out
    return model.sampler(rng, (count, n), dtype)


# --------------------------------------------------------------------------
# Populations

def standardize_population(values, warn_tol: Optional[float] = None) -> np.ndarray:
    """Shift and scale values to sum 0 and mean square 1 (exactly re-normalized).

    With ``warn_tol`` set, warns when any entry moves by more than that;
    used on file loads, where a silent large adjustment usually means the
    input was not meant to be standardized.
    """
    raw = np.asarray(values, dtype=np.float64)
    if raw.ndim != 1 or raw.size < 2:
        raise InvalidInputError("population must hold at least two values")
    centered = raw - raw.mean()
    scale = math.sqrt(float(centered @ centered) / raw.size)
    if scale == 0.0:
        raise InvalidInputError("population is constant; cannot standardize")
    out = centered / scale
    # One exact re-normalization pass kills accumulated rounding.
    out = out - out.mean()
    out *= math.sqrt(out.size / float(out @ out))
    if warn_tol is not None:
        shift = float(np.max(np.abs(out - raw)))
        if shift > warn_tol:
            warnings.warn(
                f"population standardization moved entries by up to {shift:.3g}",
                stacklevel=2,
            )
    return out


def load_population(path) -> np.ndarray:
    """Population from a text file of one decimal per line, standardized."""
    values = []
    with open(path) as fh:
        for line in fh:
            tok = line.strip()
            if tok and not tok.startswith("#"):
                values.append(float(tok))
    if len(values) < 2:
        raise InvalidInputError(f"population file {path!r} holds fewer than two values")
    return standardize_population(values, warn_tol=1e-6)
