"""Latency and reliability toolkit for MDS-coded distributed matrix-vector
multiplication over packet erasure channels.

Engines:

* model       -- shared parameter types, validation, sampling primitives
* analytic    -- harmonic/Erlang order-statistic machinery and closed-form bounds
* ctmc        -- exact expected run-time for single-packet shards
* montecarlo  -- seeded simulation of coded and uncoded run-times
* reliability -- finite-retransmission success probabilities and censored latency
* optimizer   -- constrained grid search and achievable curves
* validation  -- cross-engine oracle suite
* cli         -- figure/experiment front end (`codedlat` entry point)
"""

from .analytic import (
    AsymptoticBounds,
    BoundPair,
    ErlangOrderStatTable,
    asymptotic_bounds,
    bounds_general_k,
    bounds_max_k,
    erlang_coefficients,
    erlang_order_stat_means,
    harmonic,
    kth_min_sum,
    prop1_lower,
    prop2_upper,
    uncoded_bounds,
)
from .ctmc import ChainSpec, MarkovState, expected_hitting_time, hitting_time_curve, transitions
from .model import (
    UNLIMITED,
    ConsistencyError,
    ConstraintSet,
    DivisibilityError,
    EstimateWithCI,
    PreconditionError,
    RangeError,
    RetransmissionPolicy,
    SystemParams,
    load_config,
    sample_erlang,
    sample_exponential,
    sample_geometric,
    substream,
    uncoded_erasure,
    validate,
)
from .montecarlo import (
    TrialOutcome,
    estimate_expected_runtime,
    estimate_uncoded_runtime,
    runtime_samples,
    sample_runtime,
    sample_worker_times,
    uncoded_runtime_samples,
)
from .optimizer import (
    AchievablePoint,
    DesignSpace,
    OptimizationResult,
    RateDesign,
    TaskFamily,
    max_success,
    min_bandwidth,
    min_latency,
    optimal_rate_upper_bound,
    sweep_epsilon,
)
from .reliability import (
    CensoredRuntime,
    SuccessProfile,
    latency_quantile,
    runtime_cdf,
    runtime_cdf_curve,
    sample_censored_comm_time,
    system_success_prob,
    worker_success_prob,
)
from .validation import ValidationReport, run_validation

__version__ = "0.1.0"
