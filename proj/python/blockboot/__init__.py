"""Spatial block bootstrap for regression on irregularly spaced data."""

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    __version__,
    bootstrap,
    fit,
    sigma_c_mean,
    simulate_field,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "__version__",
    "bootstrap",
    "fit",
    "sigma_c_mean",
    "simulate_field",
]
