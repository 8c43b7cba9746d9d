"""Reflected Brownian particle systems and their mean-field limits."""

from ._core import (
    ConfigError,
    analytic_boundary_mean,
    completely_s,
    reflect,
    run_config,
    sample_environment,
    simulate,
    solve_mean_field,
    spectral_radius,
    wasserstein1,
    __version__,
)

__all__ = [
    "ConfigError",
    "analytic_boundary_mean",
    "completely_s",
    "reflect",
    "run_config",
    "sample_environment",
    "simulate",
    "solve_mean_field",
    "spectral_radius",
    "wasserstein1",
    "__version__",
]
