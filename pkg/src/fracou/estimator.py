"""Moment estimator of the drift.

With ``a(theta) = H Gamma(2H) theta^(-2H)`` the stationary second moment,
the estimator inverts ``a`` at the empirical mean of squares ``B_n``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma

from .covariance import GramMatrix
from .errors import DegeneratePathError, ParameterDomainError
from .sampler import PathSample


def _check_hurst(hurst):
    if not 0 < hurst < 1:
        raise ParameterDomainError(f"hurst must lie in (0,1), got {hurst}")


def g_of(theta, hurst):
    """``g(y) = H Gamma(2H) y^(-2H)``; broadcasts over arrays."""
    _check_hurst(hurst)
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise ParameterDomainError("g is defined for positive arguments only")
    out = hurst * gamma(2.0 * hurst) * theta ** (-2.0 * hurst)
    return float(out) if out.ndim == 0 else out


def f_of(x, hurst):
    """Inverse of :func:`g_of`: ``f(x) = (x / (H Gamma(2H)))^(-1/(2H))``."""
    _check_hurst(hurst)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ParameterDomainError("f is defined for positive arguments only")
    out = (x / (hurst * gamma(2.0 * hurst))) ** (-1.0 / (2.0 * hurst))
    return float(out) if out.ndim == 0 else out


def g_prime(theta, hurst):
    _check_hurst(hurst)
    return -2.0 * hurst * hurst * gamma(2.0 * hurst) * theta ** (-2.0 * hurst - 1.0)


def _values(path):
    v = path.values if isinstance(path, PathSample) else np.asarray(path, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ParameterDomainError("path must be a nonempty vector")
    return v


def b_n(path) -> float:
    """Mean of squared observations."""
    v = _values(path)
    return float(np.dot(v, v) / v.size)


def b_n_rows(paths) -> np.ndarray:
    """``b_n`` of every row of a 2-D array of paths."""
    x = np.asarray(paths, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ParameterDomainError("expected a nonempty 2-D array of paths")
    return np.einsum("ij,ij->i", x, x) / x.shape[1]


@dataclass(frozen=True)
class EstimatorResult:
    theta_hat: float
    b_n: float
    n: int
    hurst: float

    def to_dict(self):
        return {"theta_hat": self.theta_hat, "b_n": self.b_n, "n": self.n, "hurst": self.hurst}


def moment_estimate(path, hurst) -> EstimatorResult:
    """``theta_hat = f(B_n)``; raises :class:`DegeneratePathError` if ``B_n = 0``."""
    _check_hurst(hurst)
    v = _values(path)
    b = b_n(v)
    if not b > 0:
        raise DegeneratePathError("B_n = 0: the path is identically zero")
    theta_hat = f_of(b, hurst)
    if not math.isfinite(theta_hat):
        raise DegeneratePathError(f"estimate is not finite for B_n = {b!r}")
    return EstimatorResult(theta_hat, b, v.size, hurst)


def theta_hat_rows(b_values, hurst) -> np.ndarray:
    b_values = np.asarray(b_values, dtype=float)
    if np.any(~(b_values > 0)):
        raise DegeneratePathError("a replicate has B_n = 0")
    return f_of(b_values, hurst)


def w_n_realized(path, exact_mean_b_n, n=None) -> float:
    """``sqrt(n) (B_n - E B_n)``.

    ``exact_mean_b_n`` may be a number or the :class:`GramMatrix` it comes
    from; ``n`` (or the Gram size) must match the path length.
    """
    v = _values(path)
    if isinstance(exact_mean_b_n, GramMatrix):
        n = exact_mean_b_n.n if n is None else n
        if n != exact_mean_b_n.n:
            raise ParameterDomainError("n does not match the Gram matrix")
        exact_mean_b_n = exact_mean_b_n.mean_b_n()
    if n is not None and n != v.size:
        raise ParameterDomainError(f"path has length {v.size}, expected n={n}")
    if isinstance(path, PathSample) and path.model.n != v.size:
        raise ParameterDomainError("path length does not match its model")
    return math.sqrt(v.size) * (b_n(v) - exact_mean_b_n)
