"""Cumulants of ``W_n = sqrt(n)(B_n - E B_n)``.

``W_n`` is a centered quadratic form in a Gaussian vector with covariance
``P``; its cumulants are ``k_r = 2^(r-1) (r-1)! tr(P^r) / n^(r/2 - 1)``
for r >= 2.  Production code uses matrix products; the index loops are
kept as oracles for small n.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from .covariance import GramMatrix, OuModelSpec, gram_matrix, sigma_b_sq
from .errors import NumericAccuracyError, ParameterDomainError
from .estimator import b_n_rows
from .sampler import cholesky_draws


def _entries(gram):
    P = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ParameterDomainError("expected a nonempty square matrix")
    return P


def k2_exact(gram) -> float:
    P = _entries(gram)
    return 2.0 * float(np.sum(P * P)) / P.shape[0]


def k3_exact(gram) -> float:
    P = _entries(gram)
    n = P.shape[0]
    return 8.0 * float(np.sum(P * (P @ P))) / n ** 1.5


def k4_exact(gram) -> float:
    P = _entries(gram)
    n = P.shape[0]
    Q = P @ P
    k4 = 48.0 * float(np.sum(Q * Q)) / n ** 2
    if not k4 > 0:
        raise NumericAccuracyError(f"fourth cumulant is not positive ({k4!r})", achieved=k4)
    return k4


# -- brute-force oracles ------------------------------------------------------

def k2_loop(gram) -> float:
    P = _entries(gram)
    n = P.shape[0]
    s = 0.0
    for j in range(n):
        for l in range(n):
            s += P[j, l] * P[j, l]
    return 2.0 * s / n


def k3_loop(gram) -> float:
    P = _entries(gram)
    n = P.shape[0]
    s = 0.0
    for j in range(n):
        for k in range(n):
            for l in range(n):
                s += P[j, k] * P[k, l] * P[l, j]
    return 8.0 * s / n ** 1.5


def k4_loop(gram) -> float:
    P = _entries(gram)
    n = P.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    s += P[i, j] * P[j, k] * P[k, l] * P[l, i]
    return 48.0 * s / n ** 2


# -- reports ---------------------------------------------------------------

@dataclass
class CumulantReport:
    n: int
    k2: float
    k3: float
    k4: float
    sigma_b_sq_ref: float
    method: str = "exact_sum"
    stderr: Optional[Dict[str, float]] = None
    replicates: Optional[int] = None

    @property
    def gaps(self):
        return {"k2": abs(self.k2 - self.sigma_b_sq_ref), "k3": abs(self.k3), "k4": self.k4}

    def to_dict(self):
        d = {"n": self.n, "k2": self.k2, "k3": self.k3, "k4": self.k4,
             "sigma_b_sq_ref": self.sigma_b_sq_ref, "gaps": self.gaps, "method": self.method}
        if self.stderr is not None:
            d["stderr"] = self.stderr
            d["replicates"] = self.replicates
        return d


def exact_report(gram: GramMatrix, sigma_b_sq_ref=float("nan")) -> CumulantReport:
    return CumulantReport(gram.n, k2_exact(gram), k3_exact(gram), k4_exact(gram), sigma_b_sq_ref)


def w_n_draws(gram: GramMatrix, seed, count, workers=None) -> np.ndarray:
    """``count`` exact draws of ``W_n``."""
    mean = gram.mean_b_n()
    root = math.sqrt(gram.n)
    return cholesky_draws(gram, seed, count, workers=workers, tag="w_n",
                          reducer=lambda x: root * (b_n_rows(x) - mean))


def kstat_report(draws, n, sigma_b_sq_ref=float("nan"), batches=100) -> CumulantReport:
    """k-statistics of ``draws`` with standard errors from equal batches.

    The standard error of a full-sample k-statistic is estimated as the
    spread of the batch k-statistics divided by ``sqrt(batches)``.
    """
    draws = np.asarray(draws, dtype=float)
    M = draws.size
    if M < 4 * batches:
        raise ParameterDomainError("need at least 4 draws per batch")
    ks = [float(stats.kstat(draws, r)) for r in (2, 3, 4)]
    per = M // batches
    split = draws[: per * batches].reshape(batches, per)
    se = {}
    for r, name in ((2, "k2"), (3, "k3"), (4, "k4")):
        b = np.array([stats.kstat(row, r) for row in split])
        se[name] = float(np.std(b, ddof=1) / math.sqrt(batches))
    return CumulantReport(n, ks[0], ks[1], ks[2], sigma_b_sq_ref, "monte_carlo", se, M)


def mc_cumulants(gram: GramMatrix, seed, count, workers=None, sigma_b_sq_ref=float("nan")):
    return kstat_report(w_n_draws(gram, seed, count, workers), gram.n, sigma_b_sq_ref)


# -- decay table ---------------------------------------------------------------

def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    if xs.size < 2:
        raise ParameterDomainError("need at least two points for a slope")
    return float(np.polyfit(xs, ys, 1)[0])


@dataclass
class CumulantTable:
    reports: List[CumulantReport]
    slopes: Dict[str, float] = field(default_factory=dict)
    model: Optional[OuModelSpec] = None

    def to_dict(self):
        return {"reports": [r.to_dict() for r in self.reports], "slopes": self.slopes,
                "model": self.model.to_dict() if self.model else None}


def cumulant_decay_table(model_base: OuModelSpec, ns: Sequence[int], tol=1e-10) -> CumulantTable:
    """Exact cumulants for each ``n`` in ``ns`` and their log-log slopes.

    All sizes share one Gram matrix: since ``X_0 = 0`` the Gram of the first
    ``n`` observations is the leading block of the largest one.
    """
    ns = [int(n) for n in ns]
    if not ns or any(n < 1 for n in ns):
        raise ParameterDomainError("ns must be a nonempty list of positive integers")
    model_base.require_rate_regime()
    big = gram_matrix(model_base.with_n(max(ns)))
    ref = sigma_b_sq(model_base.theta, model_base.h, model_base.hurst, tol)
    reports = [exact_report(big.leading(n), ref) for n in ns]
    slopes = {}
    if len(ns) >= 2:
        for key in ("k2", "k3", "k4"):
            gaps = [r.gaps[key] for r in reports]
            slopes[key] = loglog_slope(ns, gaps) if all(g > 0 for g in gaps) else float("nan")
    return CumulantTable(reports, slopes, model_base.with_n(max(ns)))
