"""Simulation and inference toolkit for explosive log-linear count series.

Counts are discretized scale-family innovations, ``X_t = floor(sigma_t Y_t)``,
with a log-linear feedback intensity and a logarithmic trend.  The package
simulates the process, certifies its geometric memory decay by an ordered
maximal coupling experiment, fits the trend exponent by least squares, and
quantifies uncertainty with a dependent wild bootstrap.
"""

from .bootstrap import (
    BootstrapConfig,
    ConfidenceInterval,
    CoverageCell,
    confidence_interval,
    coverage_experiment,
    multipliers,
    t_star,
    t_star_variance,
)
from .coupling import (
    CoupledRun,
    CouplingExperimentResult,
    coupled_draw,
    estimate_beta,
    run_coupled_chains,
)
from .errors import ConfigError, DataError, ExplosionError, NumericError
from .estimation import (
    TargetTheta,
    TrendFit,
    asymptotic_sigma2,
    ensemble_theta_hats,
    loglog_sum_check,
    mean_log_curve,
    nn_mean,
    nn_means,
    t_statistic,
    theta_bar_mc,
    theta_hat,
    trend_weights,
)
from .innovations import (
    ChiSquare,
    DiscretizedLaw,
    DistributionConstants,
    Exponential,
    HalfCauchy,
    HalfNormal,
    InnovationSpec,
    compute_constants,
    innovation_from_json,
    innovation_to_json,
    sample_y,
    tv_bound_check,
    tv_distance,
)
from .process import (
    ExogenousSpec,
    ModelParams,
    Trajectory,
    initial_law,
    simulate,
    step,
    theorem1_bound,
    theoretical_autocovariance,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "ChiSquare",
    "ConfidenceInterval",
    "ConfigError",
    "CoupledRun",
    "CouplingExperimentResult",
    "CoverageCell",
    "DataError",
    "DiscretizedLaw",
    "DistributionConstants",
    "ExogenousSpec",
    "ExplosionError",
    "Exponential",
    "HalfCauchy",
    "HalfNormal",
    "InnovationSpec",
    "ModelParams",
    "NumericError",
    "TargetTheta",
    "Trajectory",
    "TrendFit",
    "asymptotic_sigma2",
    "compute_constants",
    "confidence_interval",
    "coupled_draw",
    "coverage_experiment",
    "ensemble_theta_hats",
    "estimate_beta",
    "initial_law",
    "innovation_from_json",
    "innovation_to_json",
    "loglog_sum_check",
    "mean_log_curve",
    "multipliers",
    "nn_mean",
    "nn_means",
    "run_coupled_chains",
    "sample_y",
    "simulate",
    "step",
    "t_star",
    "t_star_variance",
    "t_statistic",
    "theorem1_bound",
    "theoretical_autocovariance",
    "theta_bar_mc",
    "theta_hat",
    "trend_weights",
    "tv_bound_check",
    "tv_distance",
    "validate",
]
