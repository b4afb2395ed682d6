"""Additive Gaussian noise calibration for Renyi privacy targets.

The library answers one question in several settings: how much centred
Gaussian noise must a release carry so that the order-alpha Renyi divergence
between the secret-conditioned output distributions stays below epsilon.
Priors may be single Gaussians or fitted Gaussian mixtures; a quantile-shift
baseline is included for comparison.
"""

from .calibrate import (
    CalibrationMethod,
    CalibrationResult,
    Monotonicity,
    alpha_monotonicity_sign,
    calibrate_closed_form,
    calibrate_exact,
    calibrate_symmetric,
    noise_domain_floor,
    relaxed_divergence_bound,
)
from .data import (
    QueryKind,
    QuerySpec,
    Scenario,
    ScenarioData,
    clamped_mean_prior,
    load_scenario,
    mean_query_prior,
    raw_query_prior,
    winf_baseline_theta,
    winf_distance,
)
from .divergence import (
    GaussianPair,
    GaussianPrior,
    PrivacyTarget,
    kl_limit_check,
    privacy_loss,
    quadrature_divergence,
    renyi_gaussian,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    EmptyData,
    EmptySecret,
    FileError,
    MarginalError,
    NonMonotoneDetected,
    ParamError,
    RppError,
    SchemaError,
    TooFewSamples,
)
from .gmm import (
    FitReport,
    GmmPrior,
    em_fit,
    fit_with_bic,
    gmm_from_json_dict,
    gmm_to_json_dict,
    variance_floor,
)
from .gmm_calibrate import (
    GmmPair,
    calibrate_gmm,
    mixture_divergence_bound,
    mixture_domain_floor,
    noised,
    pair_exponent,
)
from .transport import Coupling, component_cost, monge_map, solve_ot

__version__ = "0.1.0"

__all__ = [
    "CalibrationMethod",
    "CalibrationResult",
    "ConfigError",
    "ConvergenceError",
    "Coupling",
    "DataError",
    "DomainError",
    "EmptyData",
    "EmptySecret",
    "FileError",
    "FitReport",
    "GaussianPair",
    "GaussianPrior",
    "GmmPair",
    "GmmPrior",
    "MarginalError",
    "Monotonicity",
    "NonMonotoneDetected",
    "ParamError",
    "PrivacyTarget",
    "QueryKind",
    "QuerySpec",
    "RppError",
    "Scenario",
    "ScenarioData",
    "SchemaError",
    "TooFewSamples",
    "alpha_monotonicity_sign",
    "calibrate_closed_form",
    "calibrate_exact",
    "calibrate_gmm",
    "calibrate_symmetric",
    "clamped_mean_prior",
    "component_cost",
    "em_fit",
    "fit_with_bic",
    "gmm_from_json_dict",
    "gmm_to_json_dict",
    "kl_limit_check",
    "load_scenario",
    "mean_query_prior",
    "mixture_divergence_bound",
    "mixture_domain_floor",
    "monge_map",
    "noise_domain_floor",
    "noised",
    "pair_exponent",
    "privacy_loss",
    "quadrature_divergence",
    "raw_query_prior",
    "relaxed_divergence_bound",
    "renyi_gaussian",
    "solve_ot",
    "variance_floor",
    "winf_baseline_theta",
    "winf_distance",
]
