"""Projection-direction sets and their norm and Gram summaries.

A direction set holds k unit vectors in R^n onto which an n-dimensional
random vector is projected.  Everything downstream (error bounds,
simulated pairs, discrepancy estimates) consumes either the raw rows or
one of two derived summaries:

* ``NormSummary`` -- the l4/l3 norm sums that drive the bound magnitudes,
* ``GramData``    -- pairwise inner products and the largest eigenvalue,
  which inflates the bounds for non-orthonormal sets.

Constructors cover the two families used throughout: sign-vector rows of
a Sylvester-type orthogonal design (all entries +-n^{-1/2}) and uniformly
random orthonormal frames, each optionally built inside the zero-sum
hyperplane so that every row sums to zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, LinearDependenceError, UnsupportedDimensionError

# Row-level validation (norms, orthogonality, centering).
VALIDATION_TOL = 1e-10
# Factorization round trips (Gram-Schmidt recomposition).
RECOMPOSITION_TOL = 1e-8

ORTHONORMAL = "orthonormal"
LINEARLY_INDEPENDENT = "linearly-independent"
CENTERED_ORTHONORMAL = "centered-orthonormal"
KINDS = (ORTHONORMAL, LINEARLY_INDEPENDENT, CENTERED_ORTHONORMAL)

# Kinds whose rows form an orthonormal family.
ORTHONORMAL_KINDS = (ORTHONORMAL, CENTERED_ORTHONORMAL)


def lp_norm(v, p: float) -> float:
    """l_p norm (sum_i |v_i|^p)^(1/p) of a non-empty real vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError("lp_norm expects a non-empty 1-d vector")
    if p < 1:
        raise InvalidInputError(f"lp_norm requires p >= 1, got {p}")
    a = np.abs(v)
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(v, v)))
    if p == 3:
        return float(np.cbrt(np.sum(a * a * a)))
    if p == 4:
        s = np.dot(v * v, v * v)
        return float(np.sqrt(np.sqrt(s)))
    return float(np.sum(a**p) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """k unit rows theta_1..theta_k in R^n, validated on construction.

    ``kind`` declares the structure the rows are guaranteed to have:
    ``orthonormal`` (pairwise inner products vanish),
    ``centered-orthonormal`` (additionally each row sums to zero), or
    ``linearly-independent`` (unit rows with a nonsingular Gram matrix).
    """

    vectors: np.ndarray
    kind: str

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] < 1 or vecs.shape[1] < 1:
            raise InvalidInputError("vectors must be a non-empty (k, n) array")
        k, n = vecs.shape
        if k > n:
            raise InvalidInputError(f"need k <= n, got k={k}, n={n}")
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown direction kind {self.kind!r}")
        vecs = np.ascontiguousarray(vecs)
        vecs.flags.writeable = False
        object.__setattr__(self, "vectors", vecs)

        norms = np.sqrt(np.einsum("ij,ij->i", vecs, vecs))
        if np.max(np.abs(norms - 1.0)) > VALIDATION_TOL:
            raise InvalidInputError(
                f"rows must be unit vectors (worst deviation {np.max(np.abs(norms - 1.0)):.3e})"
            )
        g = vecs @ vecs.T
        if self.kind in ORTHONORMAL_KINDS:
            off = g - np.eye(k)
            if np.max(np.abs(off)) > VALIDATION_TOL:
                raise InvalidInputError(
                    f"rows are not orthonormal (worst inner product {np.max(np.abs(off)):.3e})"
                )
        else:
            eigs = np.linalg.eigvalsh((g + g.T) / 2.0)
            if eigs[0] <= VALIDATION_TOL:
                raise LinearDependenceError(
                    f"rows are numerically dependent (smallest Gram eigenvalue {eigs[0]:.3e})"
                )
        if self.kind == CENTERED_ORTHONORMAL:
            sums = vecs.sum(axis=1)
            if np.max(np.abs(sums)) > VALIDATION_TOL:
                raise InvalidInputError(
                    f"rows must sum to zero (worst row sum {np.max(np.abs(sums)):.3e})"
                )

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    def max_row_sum(self) -> float:
        """Largest |sum_r theta_i^r| over rows; 0 means exactly centered."""
        return float(np.max(np.abs(self.vectors.sum(axis=1))))

    def is_centered(self, tol: float = VALIDATION_TOL) -> bool:
        return self.max_row_sum() <= tol

    def to_csv(self) -> str:
        lines = [f"# n={self.n} k={self.k} kind={self.kind}"]
        for row in self.vectors:
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "DirectionSet":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise InvalidInputError("direction text must start with a '# n=.. k=.. kind=..' header")
        m = re.match(r"#\s*n=(\d+)\s+k=(\d+)\s+kind=(\S+)", lines[0])
        if m is None:
            raise InvalidInputError(f"malformed direction header: {lines[0]!r}")
        n, k, kind = int(m.group(1)), int(m.group(2)), m.group(3)
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        vecs = np.array(rows, dtype=np.float64)
        if vecs.shape != (k, n):
            raise InvalidInputError(
                f"direction data shape {vecs.shape} does not match header (k={k}, n={n})"
            )
        return cls(vectors=vecs, kind=kind)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path) -> "DirectionSet":
        with open(path) as fh:
            return cls.from_csv(fh.read())


@dataclass(frozen=True)
class NormSummary:
    """Norm sums of a direction set, plus the provenance the bounds check.

    ``sum_l4_sq``     = sum_i ||theta_i||_4^2
    ``sum_l3_cubed``  = sum_i ||theta_i||_3^3
    ``sum_l4_all_sq`` = (sum_i ||theta_i||_4)^2
    """

    n: int
    k: int
    kind: str
    centered: bool
    sum_l4_sq: float
    sum_l3_cubed: float
    sum_l4_all_sq: float


def norm_summary(ds: DirectionSet) -> NormSummary:
    """Compute the three norm sums entering the error bounds.

    Unit rows force ||theta||_4^2 and ||theta||_3^3 into [n^(-1/2), 1],
    so each per-row sum lands in [k/sqrt(n), k]; this sandwich is checked.
    """
    v = ds.vectors
    v2 = v * v
    row_l4_4 = np.einsum("ij,ij->i", v2, v2)
    row_l4_sq = np.sqrt(row_l4_4)
    row_l3_3 = np.einsum("ij,ij->i", np.abs(v), v2)

    lo = 1.0 / math.sqrt(ds.n) - 1e-12
    hi = 1.0 + 1e-12
    if np.any(row_l4_sq < lo) or np.any(row_l4_sq > hi):
        raise InvalidInputError("||theta||_4^2 outside [n^-1/2, 1]; rows are not unit vectors")
    if np.any(row_l3_3 < lo):
        raise InvalidInputError("||theta||_3^3 below n^-1/2; rows are not unit vectors")

    return NormSummary(
        n=ds.n,
        k=ds.k,
        kind=ds.kind,
        centered=ds.is_centered(),
        sum_l4_sq=float(row_l4_sq.sum()),
        sum_l3_cubed=float(row_l3_3.sum()),
        sum_l4_all_sq=float(np.sqrt(row_l4_sq).sum() ** 2),
    )


@dataclass(frozen=True, eq=False)
class GramData:
    """Gram matrix C with c_ij = <theta_i, theta_j> and its largest eigenvalue."""

    C: np.ndarray
    lambda_max: float


def gram(ds: DirectionSet) -> GramData:
    """Gram matrix and largest eigenvalue of a (at least) linearly independent set."""
    v = ds.vectors
    c = v @ v.T
    c = (c + c.T) / 2.0
    if np.max(np.abs(np.diagonal(c) - 1.0)) > VALIDATION_TOL:
        raise InvalidInputError("Gram diagonal must be 1: rows are not unit vectors")
    eigs = np.linalg.eigvalsh(c)
    if eigs[0] <= VALIDATION_TOL:
        raise LinearDependenceError(
            f"direction set is numerically dependent (smallest eigenvalue {eigs[0]:.3e})"
        )
    lam = float(eigs[-1])
    if not (1.0 - 1e-8 <= lam <= ds.k + 1e-8):
        raise InvalidInputError(f"largest Gram eigenvalue {lam} outside [1, k]")
    c.flags.writeable = False
    return GramData(C=c, lambda_max=lam)


@dataclass(frozen=True, eq=False)
class GramSchmidtResult:
    """Lower-triangular B and orthonormal rows eta with theta_i = sum_j B_ij eta_j.

    By construction B B^T reproduces the Gram matrix of the input rows.
    """

    B: np.ndarray
    eta: np.ndarray


def gram_schmidt(ds: DirectionSet) -> GramSchmidtResult:
    """Orthonormalize the rows, returning the triangular change of basis.

    Modified Gram-Schmidt with one reorthogonalization pass; the pass
    coefficients are accumulated into B so the recomposition identity
    theta_i = sum_j B_ij eta_j holds to working precision.
    """
    theta = ds.vectors
    k, n = theta.shape
    b = np.zeros((k, k))
    eta = np.zeros((k, n))
    for i in range(k):
        v = theta[i].copy()
        for _ in range(2):
            for j in range(i):
                c = float(eta[j] @ v)
                b[i, j] += c
                v -= c * eta[j]
        piv = float(np.linalg.norm(v))
        if piv < VALIDATION_TOL:
            raise LinearDependenceError(f"row {i} is numerically dependent (pivot {piv:.3e})")
        b[i, i] = piv
        eta[i] = v / piv
    b.flags.writeable = False
    eta.flags.writeable = False
    return GramSchmidtResult(B=b, eta=eta)


def hypercube_directions(n: int, k: int, centered: bool = False) -> DirectionSet:
    """k orthonormal rows with every entry +-n^(-1/2), via Sylvester doubling.

    Requires n to be a power of two.  Row r has signs (-1)^<bits(r), bits(c)>.
    With ``centered`` the constant row is skipped (rows 1..k), making every
    row sum to zero; this costs one row of capacity (k <= n-1).
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise UnsupportedDimensionError(
            f"sign-design directions need n to be a power of two, got {n}"
        )
    limit = n - 1 if centered else n
    if not 1 <= k <= limit:
        raise InvalidInputError(f"need 1 <= k <= {limit} for n={n} (centered={centered})")
    start = 1 if centered else 0
    cols = np.arange(n, dtype=np.uint64)
    scale = 1.0 / math.sqrt(n)
    rows = np.empty((k, n))
    for i in range(k):
        parity = (np.bitwise_count(cols & np.uint64(start + i)) & 1).astype(np.int64)
        rows[i] = scale * (1.0 - 2.0 * parity)
    kind = CENTERED_ORTHONORMAL if centered else ORTHONORMAL
    return DirectionSet(vectors=rows, kind=kind)


def _haar_rows(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    """First k rows of a Haar-distributed n x n orthogonal matrix."""
    g = rng.standard_normal((n, k))
    q, r = np.linalg.qr(g)
    signs = np.where(np.diagonal(r) < 0.0, -1.0, 1.0)
    return (q * signs).T


def _embed_zero_sum(w: np.ndarray) -> np.ndarray:
    """Map rows of R^(n-1) isometrically onto the zero-sum hyperplane of R^n.

    Uses the Householder reflection exchanging e_1 with the normalized
    all-ones vector; its columns 2..n are an orthonormal basis of
    {x : sum x_r = 0}.
    """
    k, m = w.shape
    n = m + 1
    v = -np.full(n, 1.0 / math.sqrt(n))
    v[0] += 1.0
    vtv = float(v @ v)
    x = np.concatenate([np.zeros((k, 1)), w], axis=1)
    beta = 2.0 * (x @ v) / vtv
    return x - np.outer(beta, v)


def random_orthonormal(n: int, k: int, seed: int, centered: bool = False) -> DirectionSet:
    """Uniformly random orthonormal frame of k rows, deterministic given seed.

    With ``centered`` the frame is drawn inside the zero-sum hyperplane by
    rotating a fixed orthonormal basis of that hyperplane, so every row
    sums to zero.
    """
    limit = n - 1 if centered else n
    if not 1 <= k <= limit:
        raise InvalidInputError(f"need 1 <= k <= {limit} for n={n} (centered={centered})")
    rng = np.random.default_rng(seed)
    if centered:
        rows = _embed_zero_sum(_haar_rows(rng, k, n - 1))
        return DirectionSet(vectors=rows, kind=CENTERED_ORTHONORMAL)
    return DirectionSet(vectors=_haar_rows(rng, k, n), kind=ORTHONORMAL)


def sphere_mean_l3_cubed(n: int) -> float:
    """E ||theta||_3^3 for theta uniform on the unit sphere of R^n.

    Equals n Gamma(n/2) / (sqrt(pi) Gamma(n/2 + 3/2)), roughly sqrt(8/(pi n)).
    """
    if n < 1:
        raise InvalidInputError("dimension must be positive")
    return math.exp(
        math.log(n) + math.lgamma(n / 2.0) - 0.5 * math.log(math.pi) - math.lgamma(n / 2.0 + 1.5)
    )


def sphere_mean_l4_sq_bound(n: int) -> float:
    """Upper bound sqrt(3/(n+2)) for E ||theta||_4^2 on the unit sphere."""
    if n < 1:
        raise InvalidInputError("dimension must be positive")
    return math.sqrt(3.0 / (n + 2.0))
