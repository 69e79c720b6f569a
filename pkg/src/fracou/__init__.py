"""Moment estimation for fractional Ornstein-Uhlenbeck processes."""

from .errors import (ConfigError, DegeneratePathError, FracOUError, NotPositiveDefiniteError,
                     NumericAccuracyError, ParameterDomainError)
from .noise import Family, NoiseSpec, kernel_cov
from .covariance import (GramMatrix, OuModelSpec, gram_matrix, limit_variances, ou_cov,
                         sigma_b_sq, stationary_cov, stationary_variance)
from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "DegeneratePathError", "Family", "FracOUError", "GramMatrix",
    "NoiseSpec", "NotPositiveDefiniteError", "NumericAccuracyError", "OuModelSpec",
    "ParameterDomainError", "gram_matrix", "kernel_cov", "limit_variances", "ou_cov",
    "sigma_b_sq", "stationary_cov", "stationary_variance",
]
