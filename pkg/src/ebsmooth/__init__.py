"""Spline regression with data-driven smoothing parameter, penalty order,
noise level, and nonparametric stationary-noise correlation."""

__version__ = "0.1.0"

from .credible import CredibleSet, credible_set, radius_quantile, sample_posterior
from .dr_basis import (
    DRBasis,
    build_basis,
    coefficients,
    sobolev_eigenfunction,
    sobolev_eigenvalue,
)
from .driver import FitConfig, FitResult, fit, fit_fixed_q
from .estimating import (
    default_lambda_grid,
    solve_lambda,
    solve_q,
    smooth_rho,
    t_lambda,
    t_q,
    update_rho,
)
from .noise_model import (
    NoiseSpec,
    SpectralModel,
    autocorr_from_spectral,
    make_spectral_model,
    simulate_noise,
    spectral_from_autocorr,
    true_autocorr,
    true_spectral,
)
from .simulation import (
    ScenarioResult,
    derivative_norm_sq,
    kappa,
    make_function,
    oracle_lambda,
    run_scenario,
)
from .smoother import SmootherSpec, SmoothFit, apply_exact, apply_fast, log_marginal

__all__ = [
    "CredibleSet", "credible_set", "radius_quantile", "sample_posterior",
    "DRBasis", "build_basis", "coefficients", "sobolev_eigenfunction",
    "sobolev_eigenvalue",
    "FitConfig", "FitResult", "fit", "fit_fixed_q",
    "default_lambda_grid", "solve_lambda", "solve_q", "smooth_rho",
    "t_lambda", "t_q", "update_rho",
    "NoiseSpec", "SpectralModel", "autocorr_from_spectral",
    "make_spectral_model", "simulate_noise", "spectral_from_autocorr",
    "true_autocorr", "true_spectral",
    "ScenarioResult", "derivative_norm_sq", "kappa", "make_function",
    "oracle_lambda", "run_scenario",
    "SmootherSpec", "SmoothFit", "apply_exact", "apply_fast", "log_marginal",
]
