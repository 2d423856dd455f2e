"""Monte Carlo laboratory for colliding CIR particle systems.

Simulates the ordered system of nonnegative coordinates with CIR-type noise
and Coulomb-like repulsion (the eigenvalue dynamics of Wishart-type matrix
processes), classifies the parameter phase diagram, detects collision and
zero-hit events, and verifies everything against exact scalar CIR oracles
and the closed-form stationary law.
"""

from .cirprocess import (
    CirBoundary,
    CirParams,
    CirState,
    LaplaceQuery,
    boundary_classification,
    conditional_mean,
    exact_step,
    integrated_laplace,
    invariant_gamma,
    partial_sum_bound_process,
    sum_process,
)
from .errors import (
    BadK,
    CoincidentCoordinates,
    ConfigError,
    DomainError,
    NoInvariantLaw,
    NotEvaluable,
    NumericalFailure,
    RegimeMismatch,
    TooFewSamples,
    ZeroCoordinate,
)
from .events import (
    Event,
    EventKind,
    EventLog,
    TimeChange,
    bessel_collision_dimension,
    detect_events,
    first_passage_partial_sum,
    integrability_diagnostic,
    time_change_A,
)
from .integrators import (
    BatchResult,
    NoiseIncrement,
    PathRecord,
    Scheme,
    SimConfig,
    SwitchingMode,
    Terminated,
    contraction_curve,
    drift_A_eps,
    drift_B_eps,
    simulate_batch,
    simulate_coupled,
    simulate_coupled_cir,
    simulate_path,
    step_c_epsilon,
    step_switching,
    step_truncated_euler,
)
from .model import (
    CollisionVerdict,
    EigenState,
    GlobalSolution,
    ModelParams,
    PairCollisions,
    RegimeReport,
    RootState,
    ZeroHitLambda1,
    classify_regime,
    drift_lambda,
    drift_lambda_dual,
    drift_root,
    grad_potential,
    multiple_collision_threshold,
    potential_value,
)
from .randomness import rng_streams, step_normals
from .stationary import (
    SampleSet,
    StationaryDensity,
    compare_long_run,
    estimate_log_normalizer,
    gamma_sum_law,
    log_density_unnormalized,
    mh_sampler,
    rejection_sample_pair,
)
from .stats import (
    StatSummary,
    binomial_summary,
    empirical_laplace,
    finite_diff_gradient,
    kolmogorov_sf,
    ks_distance,
    ks_distance_two_sample,
    ks_test,
    ks_test_two_sample,
    moment_summary,
)

__version__ = "0.1.0"
