"""Finite-horizon optimal state estimation with turnpike diagnostics.

Moving horizon estimation in standard, delayed, and prior-weighted forms, an
omniscient benchmark, an offline parallel approximate estimator, classical
filter/smoother baselines, and the metrics connecting them (performance,
regret, turnpike deviation profiles, detectability-based accuracy bounds).
"""

from .core import (
    CostSpec,
    DataBatch,
    EstimateSequence,
    HorizonSolution,
    IossCertificate,
    SolverFailure,
    ValidationError,
    validate_batch,
)
from .models import SystemModel, get_model
from .simulate import InputProfile, NoiseSpec, Overlay, simulate, split_seed, stream
from .solver import HorizonProblem, Prior, SolverOptions, solve_horizon, solve_linear_horizon
from .estimators import (
    AeConfig,
    approximate_estimator,
    delayed_mhe,
    delayed_mhe_multi,
    fie,
    fixed_interval_smoother,
    infinite_horizon_benchmark,
    kalman_filter,
    mhe,
    mhe_horizon_sweep,
    mhe_prior,
    mhe_prior_multi,
    plan_ae_windows,
    update_prior_weight_ekf,
)
from .analysis import (
    accuracy_bound,
    accuracy_bound_curve,
    fit_exponential_envelope,
    performance,
    regret,
    sse,
    turnpike_profile,
)
from .presets import compare, default_cost, preset_config, run_preset

__version__ = "0.1.0"
