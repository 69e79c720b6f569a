"""Monte Carlo Kolmogorov distances of the normalized estimator, rate
sweeps across sample sizes, and numeric audits of covariance bounds."""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import gamma, gammainc

from . import quadrature as quad
from ._kernels import ks_normal
from .covariance import GramMatrix, OuModelSpec, gram_matrix, limit_variances
from .cumulants import loglog_slope
from .errors import DegeneratePathError, ParameterDomainError
from .estimator import b_n_rows
from .noise import BoundReport, NoiseSpec
from .sampler import CHOLESKY_EXACT, SUBSTEP_EULER, cholesky_draws, substep_draws

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
SLOPE_TOLERANCE = 0.15


def theoretical_exponent(hurst) -> float:
    """Exponent of the Kolmogorov-distance rate in ``n``."""
    if not 0 < hurst < 0.75:
        raise ParameterDomainError(f"the rate is only defined for 0 < H < 3/4, got {hurst}")
    if hurst <= 0.625:
        return -0.5
    return -(3.0 - 4.0 * hurst)


def dkw_halfwidth(m, alpha=0.01) -> float:
    """Half-width of the DKW confidence band at level ``1 - alpha``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))


@dataclass
class KolmogorovReport:
    n: Optional[int]
    d_kol_hat: float
    dkw_halfwidth: float
    sigma1_sq: float
    M: int
    mean: float = float("nan")
    mean_stderr: float = float("nan")

    @property
    def at_noise_floor(self):
        return self.d_kol_hat < 2.0 * self.dkw_halfwidth

    def to_dict(self):
        return {"n": self.n, "d_kol_hat": self.d_kol_hat, "dkw_halfwidth": self.dkw_halfwidth,
                "sigma1_sq": self.sigma1_sq, "M": self.M, "mean": self.mean,
                "mean_stderr": self.mean_stderr, "at_noise_floor": self.at_noise_floor}


def kolmogorov_vs_normal(samples, sigma_sq, n=None) -> KolmogorovReport:
    """Kolmogorov distance between the empirical law of ``samples`` and
    ``N(0, sigma_sq)``, evaluated on both sides of every jump."""
    if not sigma_sq > 0:
        raise ParameterDomainError("sigma_sq must be > 0")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ParameterDomainError("samples must be nonempty")
    d = float(ks_normal(np.ascontiguousarray(x), math.sqrt(sigma_sq)))
    m = x.size
    sd = float(np.std(x, ddof=1)) if m > 1 else float("nan")
    return KolmogorovReport(n, min(max(d, 0.0), 1.0), dkw_halfwidth(m), float(sigma_sq), m,
                            float(np.mean(x)), sd / math.sqrt(m))


@dataclass
class MonteCarloConfig:
    model: OuModelSpec
    replicates: int
    seed: int
    ns: Sequence[int]
    method: str = CHOLESKY_EXACT
    substeps: int = 128
    workers: Optional[int] = None
    tol: float = 1e-10

    def __post_init__(self):
        if self.replicates < 100:
            raise ParameterDomainError("replicates must be >= 100")
        self.ns = [int(n) for n in self.ns]
        if not self.ns or any(b <= a for a, b in zip(self.ns, self.ns[1:])) or self.ns[0] < 1:
            raise ParameterDomainError("n values must be positive and strictly increasing")
        if self.method not in (CHOLESKY_EXACT, SUBSTEP_EULER):
            raise ParameterDomainError(f"unknown sampler method {self.method!r}")

    def to_dict(self):
        return {"model": self.model.to_dict(), "replicates": self.replicates, "seed": self.seed,
                "ns": list(self.ns), "method": self.method, "substeps": self.substeps,
                "tol": self.tol}


def estimator_draws(config: MonteCarloConfig, n, gram: Optional[GramMatrix] = None) -> np.ndarray:
    """``sqrt(n)(theta_hat_n - theta)`` for every replicate, in index order."""
    model = config.model.with_n(n)
    model.require_rate_regime()
    theta, H = model.theta, model.hurst
    root = math.sqrt(n)
    scale = 1.0 / (H * gamma(2.0 * H))

    def reduce(x):
        b = b_n_rows(x)
        if np.any(~(b > 0)):
            raise DegeneratePathError("a replicate has B_n = 0")
        return root * ((b * scale) ** (-0.5 / H) - theta)

    tag = f"estimator/n={n}"
    if config.method == CHOLESKY_EXACT:
        if gram is None:
            gram = gram_matrix(model)
        elif gram.n != n:
            gram = gram.leading(n)
        return cholesky_draws(gram, config.seed, config.replicates, workers=config.workers,
                              tag=tag, reducer=reduce)
    return substep_draws(model, config.substeps, config.seed, config.replicates,
                         workers=config.workers, tag=tag, reducer=reduce)


def mc_experiment(config: MonteCarloConfig, n, gram: Optional[GramMatrix] = None,
                  sigma1_sq: Optional[float] = None) -> KolmogorovReport:
    """Kolmogorov distance of ``sqrt(n)(theta_hat_n - theta)`` to ``N(0, sigma_1^2)``."""
    if sigma1_sq is None:
        sigma1_sq = limit_variances(config.model, config.tol)[1]
    return kolmogorov_vs_normal(estimator_draws(config, n, gram), sigma1_sq, n)


@dataclass
class RateReport:
    points: List[KolmogorovReport]
    slope: float
    exponent: float
    threshold: float
    monotone: bool
    excluded: List[int]
    verdict: str
    config: Dict = field(default_factory=dict)

    def to_dict(self):
        return {"verdict": self.verdict, "slope": self.slope, "exponent": self.exponent,
                "threshold": self.threshold, "monotone": self.monotone,
                "excluded_n": list(self.excluded), "points": [p.to_dict() for p in self.points],
                "config": self.config}


def judge_rate(points: Sequence[KolmogorovReport], exponent, tolerance=SLOPE_TOLERANCE):
    """Slope fit and verdict from per-n reports.

    Points below twice their DKW half-width are excluded from the fit;
    fewer than three remaining points gives an inconclusive verdict.
    """
    excluded = [p.n for p in points if p.at_noise_floor]
    kept = [p for p in points if not p.at_noise_floor]
    monotone = all(b.d_kol_hat <= a.d_kol_hat + 2.0 * max(a.dkw_halfwidth, b.dkw_halfwidth)
                   for a, b in zip(points, points[1:]))
    threshold = exponent + tolerance
    if len(kept) < 3:
        slope = float("nan")
        verdict = INCONCLUSIVE
    else:
        slope = loglog_slope([p.n for p in kept], [p.d_kol_hat for p in kept])
        verdict = PASS if (slope <= threshold and monotone) else FAIL
    return slope, threshold, monotone, excluded, verdict


def rate_sweep(config: MonteCarloConfig) -> RateReport:
    """Kolmogorov distances over ``config.ns`` and the fitted log-log slope."""
    ns = list(config.ns)
    if len(ns) < 4 or ns[-1] < 8 * ns[0]:
        raise ParameterDomainError("a rate sweep needs at least 4 sizes spanning a factor of 8")
    config.model.require_rate_regime()
    exponent = theoretical_exponent(config.model.hurst)
    sigma1_sq = limit_variances(config.model, config.tol)[1]
    big = gram_matrix(config.model.with_n(ns[-1])) if config.method == CHOLESKY_EXACT else None
    points = [mc_experiment(config, n, big, sigma1_sq) for n in ns]
    slope, threshold, monotone, excluded, verdict = judge_rate(points, exponent)
    return RateReport(points, slope, exponent, threshold, monotone, excluded, verdict,
                      config.to_dict())


# --------------------------------------------------------------------------
# bound audits

AUDIT_NAMES = ("ap1", "ap2", "ap3", "eq68", "eq69", "appendix2", "appendix3", "appendix4")

_DEFAULT_AUDIT_MODELS = {
    "ap1": NoiseSpec.fbm(0.3),
    "ap2": NoiseSpec.sub_fbm(0.3),
    "ap3": NoiseSpec.sub_fbm(0.3),
    "eq68": NoiseSpec.sub_fbm(0.6),
    "eq69": NoiseSpec.sub_fbm(0.6),
    "appendix2": NoiseSpec.fbm(0.3),
    "appendix3": NoiseSpec.fbm(0.3),
    "appendix4": NoiseSpec.fbm(0.3),
}


def default_audit_model(name) -> OuModelSpec:
    if name not in _DEFAULT_AUDIT_MODELS:
        raise ParameterDomainError(f"unknown audit {name!r}; choose from {', '.join(AUDIT_NAMES)}")
    return OuModelSpec(1.0, 1.0, 1, _DEFAULT_AUDIT_MODELS[name])


def a1_integral(t, theta, beta):
    """``int_0^t exp(-theta x) x^beta dx`` by graded quadrature."""
    return quad.integrate(lambda x: np.exp(-theta * x) * x ** beta, 0.0, t, singular=[0.0], beta=beta)


def a1_closed(t, theta, beta):
    return gamma(beta + 1.0) * gammainc(beta + 1.0, theta * t) * theta ** (-beta - 1.0)


def a2_integral(t, theta, beta):
    """``int_0^t exp(-theta (t - x)) x^beta dx`` by graded quadrature."""
    return quad.integrate(lambda x: np.exp(-theta * (t - x)) * x ** beta, 0.0, t, singular=[0.0],
                          beta=beta)


def _nested_verdict(name, sup_small, sup_large, argmax, points, ratios, growth=0.10, notes=""):
    passed = bool(np.isfinite(sup_large) and sup_large <= (1.0 + growth) * sup_small)
    return BoundReport(name=name, sup_ratio=float(sup_large), argmax=tuple(float(a) for a in argmax),
                       ratios=[float(r) for r in ratios], points=[tuple(map(float, p)) for p in points],
                       inner_sup_ratio=float(sup_small), diverging=not passed, passed=passed,
                       notes=notes)


def _audit_2d(name, model, step, extents):
    small, large = extents
    n = int(round(large / step))
    H = model.hurst
    noise = model.noise
    grid_model = OuModelSpec(model.theta, step, n, noise)
    G = gram_matrix(grid_model).entries
    if name == "ap1":
        lhs = np.abs(G)
    else:
        base = gram_matrix(grid_model.with_noise(noise.baseline())).entries
        lhs = np.abs(G - base)
    t = step * np.arange(1, n + 1)
    T, S = np.meshgrid(t, t, indexing="ij")
    lower = S <= T
    gap = np.where(lower, T - S, 0.0)
    if name == "ap1":
        weight = (1.0 + gap) ** (2.0 * (1.0 - H))
        what = "|rho(t,s)| (1 + t - s)^(2(1-H))"
    elif name == "ap2":
        weight = np.maximum.reduce([np.ones_like(S), S ** (2.0 * (1.0 - H)), gap ** (1.0 - H)])
        what = "|rho~(t,s) - rho(t,s)| max(1, s^(2(1-H)), (t-s)^(1-H))"
    else:
        weight = np.maximum.reduce([np.ones_like(S), S ** (2.0 * (1.0 - H)), gap ** (2.0 * (1.0 - H))])
        what = "|rho~(t,s) - rho(t,s)| max(1, s^(2(1-H)), (t-s)^(2(1-H)))"
    ratio = np.where(lower, lhs * weight, -np.inf)
    inner = (T <= small * (1 + 1e-12)) & lower
    sup_small = float(np.max(ratio[inner]))
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    sup_large = float(ratio[i, j])
    # keep a thinned record of the ratio along the boundary rows for the report
    rows = np.unique(np.linspace(0, n - 1, 12).astype(int))
    pts = [(float(t[r]), float(t[c])) for r in rows for c in rows if c <= r]
    vals = [float(ratio[r, c]) for r in rows for c in rows if c <= r]
    return _nested_verdict(name, sup_small, sup_large, (t[i], t[j]), pts, vals,
                           notes=f"{what}; grid step {step}, extents {small} and {large}")


def _audit_diag(name, model, times, small):
    H = model.hurst
    noise = model.noise
    times = np.asarray(times, dtype=float)
    step = times[0]
    if not np.allclose(times, step * np.arange(1, times.size + 1)):
        raise ParameterDomainError("diagonal audits need the uniform grid step, 2 step, ...")
    grid_model = OuModelSpec(model.theta, step, times.size, noise)
    G = np.diag(gram_matrix(grid_model).entries)
    base = np.diag(gram_matrix(grid_model.with_noise(noise.baseline())).entries)
    ratio = np.abs(G - base) * np.maximum(1.0, times ** (2.0 * (1.0 - H)))
    inner = times <= small * (1 + 1e-12)
    i = int(np.argmax(ratio))
    return _nested_verdict(name, float(np.max(ratio[inner])), float(ratio[i]), (times[i],),
                           [(x,) for x in times], ratio,
                           notes="|E Z_t^2 - E X_t^2| max(1, t^(2(1-H)))")


def _audit_1d(name, model, times, small):
    H = model.hurst
    theta = model.theta
    beta = 2.0 * H - 1.0
    times = np.asarray(times, dtype=float)
    if name == "appendix2":
        lhs = np.array([a1_integral(t, theta, beta) for t in times])
        major = np.minimum(1.0, times ** (beta + 1.0))
        what = "A1(t) / (1 ^ t^(beta+1))"
    else:
        lhs = np.array([a2_integral(t, theta, beta) for t in times])
        if name == "appendix3":
            major = np.minimum(times ** beta, times ** (beta + 1.0))
            what = "A2(t) / (t^beta ^ t^(beta+1))"
        else:
            if not -1.0 < beta < 0.0:
                raise ParameterDomainError("this bound needs beta in (-1, 0), i.e. H < 1/2")
            major = np.minimum(1.0, times ** beta)
            what = "A2(t) / (1 ^ t^beta)"
    ratio = lhs / major
    inner = times <= small * (1 + 1e-12)
    i = int(np.argmax(ratio))
    return _nested_verdict(name, float(np.max(ratio[inner])), float(ratio[i]), (times[i],),
                           [(x,) for x in times], ratio,
                           notes=f"{what}; beta = 2H - 1 = {beta:g}, theta = {theta:g}")


def bound_audit(name, model: Optional[OuModelSpec] = None, grid=None, extents=(50.0, 100.0)) -> BoundReport:
    """Sup of (left side) / (majorant) of a named covariance bound.

    The sup is taken over the grid cut at each of the two ``extents``; the
    audit passes when the larger extent raises the sup by less than 10%.
    ``grid`` is a step size for the two-dimensional audits (default 0.5)
    and an array of times for the one-dimensional ones.
    """
    if model is None:
        model = default_audit_model(name)
    elif name not in AUDIT_NAMES:
        raise ParameterDomainError(f"unknown audit {name!r}")
    small, large = (float(e) for e in extents)
    if not 0 < small < large:
        raise ParameterDomainError("extents must satisfy 0 < small < large")
    if name in ("ap2", "ap3", "eq68", "eq69") and model.noise.is_fbm:
        raise ParameterDomainError(f"{name} compares a non-fBm noise with fBm")
    if name in ("ap1", "ap2", "eq68"):
        step = 0.5 if grid is None else float(grid)
        return _audit_2d(name, model, step, (small, large))
    if name in ("ap3", "eq69"):
        times = np.arange(1.0, large + 0.5) if grid is None else np.asarray(grid, dtype=float)
        return _audit_diag(name, model, times, small)
    times = np.geomspace(0.01, large, 81) if grid is None else np.asarray(grid, dtype=float)
    if np.any(times <= 0):
        raise ParameterDomainError("times must be positive")
    return _audit_1d(name, model, times, small)
