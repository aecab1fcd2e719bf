"""Explicit Gaussian-approximation error bounds for rank-k projections of
n-dimensional random vectors, with Monte Carlo verification of every bound
against simulated data."""

from .bounds import (
    DEFAULT_EXCHANGEABLE_CONSTANTS,
    UNIT_CONSTANTS,
    BoundReport,
    EijStats,
    ExchangeableConstants,
    bound_abstract,
    bound_exch,
    bound_exch_linind,
    bound_iid,
    bound_indep,
    bound_linind,
)
from .directions import (
    CENTERED_ORTHONORMAL,
    LINEARLY_INDEPENDENT,
    ORTHONORMAL,
    DirectionSet,
    GramData,
    GramSchmidtResult,
    NormSummary,
    gram,
    gram_schmidt,
    hypercube_directions,
    lp_norm,
    norm_summary,
    random_orthonormal,
    sphere_mean_l3_cubed,
    sphere_mean_l4_sq_bound,
)
from .empirics import (
    RESAMPLING,
    TRANSPOSITION,
    DiscrepancyEstimate,
    Estimate,
    PairStats,
    VerificationReport,
    VerificationTask,
    compute_bound,
    conditional_linearity_check,
    eij_closed_form,
    eij_enumerated,
    estimate_discrepancy,
    pair_stats,
    project,
    resample_pair,
    stein_lambda,
    transpose_pair,
    verify_bound,
)
from .errors import (
    ConfigError,
    InvalidInputError,
    InvalidMomentsError,
    LinearDependenceError,
    MissingMomentsError,
    ProjcltError,
    UnsupportedDimensionError,
    UnsupportedMethodError,
    WrongPairKindError,
)
from .sources import (
    ExchangeableModel,
    IIDModel,
    IndependentModel,
    MomentSummary,
    centered_exponential,
    exchangeable_moments,
    iid_moments,
    independent_moments,
    load_population,
    moment_summary,
    rademacher,
    sample_block,
    sample_vector,
    standardize_population,
    two_point,
    uniform,
    user_model,
)
from .testfuncs import (
    Expectation,
    GaussianSpec,
    TestFunction,
    bump_testfn,
    cosine_testfn,
    gaussian_expectation,
)

__version__ = "0.1.0"
