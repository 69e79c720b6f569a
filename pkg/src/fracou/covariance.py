"""Covariance of the OU observation vector driven by a Gaussian noise.

Write ``X_t = int_0^t exp(-theta (t - u)) dG_u``.  Cutting time into panels
``I_k``, each observation satisfies the exact recursion

    X_{end(I_k)} = exp(-theta |I_k|) X_{start(I_k)} + xi_k,
    xi_k = int_{I_k} exp(-theta (end(I_k) - u)) dG_u,

so the covariance of the observations is ``L C L^T`` with ``C`` the
covariance of the panel increments ``xi``.  ``C`` is linear in the kernel
``R``; every kernel here is a sum of elementary terms (see
:meth:`fracou.noise.NoiseSpec.terms`) and each term reduces to one- or
two-dimensional integrals of its mixed partial derivative against
exponential weights.  The only non-integrable case, a ``|u - v|^p`` term on
a panel paired with itself, is handled by integration by parts.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, eigvalsh
from scipy.signal import lfilter
from scipy.special import gamma, zeta

from . import quadrature as quad
from ._kernels import bi_tensor
from .errors import NotPositiveDefiniteError, NumericAccuracyError, ParameterDomainError
from .noise import NoiseSpec

HORIZON_CAP = 1e6
# exp(-42) ~ 5.7e-19: contributions of panels further back are dropped
_WINDOW = 42.0


@dataclass(frozen=True)
class OuModelSpec:
    """dX = -theta X dt + dG, X_0 = 0, observed at h, 2h, ..., nh."""

    theta: float
    h: float
    n: int
    noise: NoiseSpec

    def __post_init__(self):
        if not (isinstance(self.theta, (int, float)) and self.theta > 0 and math.isfinite(self.theta)):
            raise ParameterDomainError(f"theta must be > 0, got {self.theta!r}")
        if not (isinstance(self.h, (int, float)) and self.h > 0 and math.isfinite(self.h)):
            raise ParameterDomainError(f"h must be > 0, got {self.h!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "n", int(self.n))
        if not isinstance(self.noise, NoiseSpec):
            raise ParameterDomainError("noise must be a NoiseSpec")

    @property
    def hurst(self):
        return self.noise.hurst

    def with_n(self, n):
        return OuModelSpec(self.theta, self.h, n, self.noise)

    def with_noise(self, noise):
        return OuModelSpec(self.theta, self.h, self.n, noise)

    def require_rate_regime(self):
        if not self.hurst < 0.75:
            raise ParameterDomainError(
                f"the central limit regime needs H < 3/4, got H={self.hurst}")

    def to_dict(self):
        return {"theta": self.theta, "h": self.h, "n": self.n, "noise": self.noise.to_dict()}


def stationary_variance(theta, hurst):
    """``a = H Gamma(2H) theta^(-2H)``, the stationary second moment."""
    if theta <= 0 or not 0 < hurst < 1:
        raise ParameterDomainError("need theta > 0 and 0 < H < 1")
    return hurst * gamma(2.0 * hurst) * theta ** (-2.0 * hurst)


# --------------------------------------------------------------------------
# panel-pair integrals for the elementary kernel terms

def _kappa_diff(tau, l1, l2, theta):
    """int e1(x) e2(y) over the segment x - y = tau of [0,l1]x[0,l2]."""
    tau = np.asarray(tau, dtype=float)
    xlo = np.maximum(0.0, tau)
    xhi = np.minimum(l1, l2 + tau)
    span = np.maximum(xhi - xlo, 0.0)
    a = theta * (l1 + l2 + tau - 2.0 * xhi)
    return np.exp(-a) * (-np.expm1(-2.0 * theta * span)) / (2.0 * theta)


def _kappa_sum(sigma, l1, l2, theta):
    """int e1(x) e2(y) over the segment x + y = sigma of [0,l1]x[0,l2]."""
    sigma = np.asarray(sigma, dtype=float)
    length = np.maximum(np.minimum(l1, sigma) - np.maximum(0.0, sigma - l2), 0.0)
    return np.exp(-theta * (l1 + l2 - sigma)) * length


def _diff_mixed(term, x):
    # d/du d/dv of coef*|u-v|^p evaluated at u - v = x
    p = term.p
    return -term.coef * p * (p - 1.0) * np.abs(x) ** (p - 2.0)


def _sum_mixed(term, x):
    p = term.p
    return term.coef * p * (p - 1.0) * x ** (p - 2.0)


def _kappa_edges(r1, r2, l1, l2, theta):
    """``_kappa_diff`` written with the distances ``r1 = tau + l2`` and
    ``r2 = l1 - tau`` to the ends of the support, which keeps full relative
    precision where the segment shrinks to a corner."""
    span = np.maximum(np.minimum(np.minimum(r1, r2), min(l1, l2)), 0.0)
    return np.exp(-theta * np.abs(l1 - r1)) * (-np.expm1(-2.0 * theta * span)) / (2.0 * theta)


def _diff_breaks(l1, l2):
    return sorted({-l2, 0.0, l1 - l2, l1})


def diff_pair(term, D, l1, l2, theta):
    """Increment covariance of a ``|u-v|^p`` term for panels ``[a,a+l1]``,
    ``[c,c+l2]`` that do not coincide; ``D = a - c``.

    The integral runs over the distance ``y = u - v`` so that the kernel
    singularity sits exactly at ``y = 0``.
    """
    if term.p == 1.0:
        return 0.0
    lo, hi = D - l2, D + l1
    br = [D, D + l1 - l2]
    y, w = quad.rule(lo, hi, singular=[0.0], beta=term.p - 1.0, breaks=br)
    vals = _kappa_edges(y - lo, hi - y, l1, l2, theta) * _diff_mixed(term, y)
    return float(np.dot(w, vals))


def diff_pairs_easy(term, D, l1, l2, theta, order=16):
    """Vectorized ``diff_pair`` for panels at least one panel width apart."""
    D = np.asarray(D, dtype=float)
    if term.p == 1.0:
        return np.zeros_like(D)
    x, w = quad.fixed_rule(_diff_breaks(l1, l2), order)
    wk = w * _kappa_diff(x, l1, l2, theta)
    return _diff_mixed(term, D[:, None] + x[None, :]) @ wk


def diff_same(term, ell, theta):
    """Increment covariance of ``coef*|u-v|^p`` for a panel paired with itself.

    Integration by parts moves the derivatives onto the exponential weights;
    the rectangle increments of the term on ``[0,x]x[0,y]`` are
    ``coef (|x-y|^p - x^p - y^p)``.
    """
    p, c = term.p, term.coef
    beta = min(p, 0.0)

    def e(x):
        return np.exp(-theta * (ell - x))

    t0 = -2.0 * c * ell ** p
    t1 = c * quad.integrate(
        lambda x: theta * e(x) * (np.abs(ell - x) ** p - x ** p - ell ** p),
        0.0, ell, singular=[0.0, ell], beta=beta)
    conv = quad.integrate(
        lambda tau: theta * theta * _kappa_diff(tau, ell, ell, theta) * np.abs(tau) ** p,
        -ell, ell, singular=[-ell, 0.0, ell], beta=beta)
    mom = quad.integrate(lambda x: theta * e(x) * x ** p, 0.0, ell, singular=[0.0], beta=beta)
    t3 = c * (conv - 2.0 * mom * (-math.expm1(-theta * ell)))
    return t0 - 2.0 * t1 + t3


def sum_pair(term, S, l1, l2, theta):
    """Increment covariance of a ``(u+v)^p`` term; ``S = a + c``."""
    br = sorted({min(l1, l2), max(l1, l2)})
    x, w = quad.rule(0.0, l1 + l2, singular=[-S], beta=term.p - 1.0, breaks=br)
    vals = _kappa_sum(x, l1, l2, theta) * _sum_mixed(term, S + x)
    return float(np.dot(w, vals))


def sum_pairs_easy(term, S, l1, l2, theta, order=16):
    """Vectorized ``sum_pair`` for ``S >= max(l1, l2)``."""
    S = np.asarray(S, dtype=float)
    x, w = quad.fixed_rule([0.0, min(l1, l2), max(l1, l2), l1 + l2], order)
    wk = w * _kappa_sum(x, l1, l2, theta)
    return _sum_mixed(term, S[:, None] + x[None, :]) @ wk


@lru_cache(maxsize=4096)
def _axis_rule(a, ell, theta, q):
    """Local nodes on ``[0, ell]`` and weights times ``exp(-theta (ell - x))``
    for the panel ``[a, a+ell]``; graded when the axis ``u = 0`` is close."""
    if a >= 4.0 * ell:
        x, w = quad.fixed_rule([0.0, ell], 8)
    elif a >= ell:
        x, w = quad.fixed_rule([0.0, ell], 16)
    else:
        u, w = quad.rule(a, a + ell, singular=[0.0], beta=q - 1.0, order=16)
        x = u - a
    w = w * np.exp(-theta * (ell - x))
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


def _axis_key(a, ell):
    if a >= 4.0 * ell:
        return ("far", ell)
    if a >= ell:
        return ("near", ell)
    return ("edge", a, ell)


def bi_pairs(term, a, l1, c, l2, theta):
    """Increment covariances of a ``(u^q + v^q)^k`` term for panel pairs.

    ``a, l1, c, l2`` are equal-length arrays of panel starts and lengths.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    l1 = np.broadcast_to(np.asarray(l1, dtype=float), a.shape)
    l2 = np.broadcast_to(np.asarray(l2, dtype=float), a.shape)
    out = np.zeros(a.shape)
    q, k = term.q, term.k
    scale = term.coef * k * (k - 1.0) * q * q
    if scale == 0.0 or a.size == 0:
        return out
    groups = {}
    for idx in range(a.size):
        key = (_axis_key(a[idx], l1[idx]), _axis_key(c[idx], l2[idx]))
        groups.setdefault(key, []).append(idx)
    for (ka, kc), members in groups.items():
        members = np.array(members)
        xn, xw = _axis_rule(_class_start(ka), ka[-1], theta, q)
        yn, yw = _axis_rule(_class_start(kc), kc[-1], theta, q)
        out[members] = bi_tensor(np.ascontiguousarray(a[members]), np.ascontiguousarray(c[members]),
                                 xn, xw, yn, yw, q, k)
    return scale * out


def _class_start(key):
    # far/near rules only depend on the panel length, so any start in the class will do
    kind, ell = key[0], key[-1]
    if kind == "edge":
        return key[1]
    return 4.0 * ell if kind == "far" else ell


# --------------------------------------------------------------------------
# uniform observation grid

def _diff_lags(term, theta, h, nlags):
    out = np.zeros(nlags)
    out[0] = diff_same(term, h, theta)
    if nlags > 1:
        out[1] = diff_pair(term, h, h, h, theta)
    if nlags > 2:
        out[2:] = diff_pairs_easy(term, h * np.arange(2, nlags), h, h, theta)
    return out


def _sum_values(term, theta, h, count):
    out = np.zeros(count)
    out[0] = sum_pair(term, 0.0, h, h, theta)
    if count > 1:
        out[1:] = sum_pairs_easy(term, h * np.arange(1, count), h, h, theta)
    return out


def _bi_matrix(term, theta, h, n):
    iu, ju = np.triu_indices(n)
    vals = bi_pairs(term, h * iu, h, h * ju, h, theta)
    out = np.zeros((n, n))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def increment_lags(noise, theta, h, nlags):
    """Lag function ``C(d) = E[xi_k xi_{k+d}]`` for stationary-increment noise."""
    out = np.zeros(nlags)
    for term in noise.terms():
        if term.kind == "diff":
            out += _diff_lags(term, theta, h, nlags)
        elif term.kind != "sep":
            raise ParameterDomainError(f"{noise.family.value} does not have stationary increments")
    return out


def increment_covariance(noise: NoiseSpec, theta, h, n):
    """``C[k, m] = E[xi_k xi_m]`` for the panels ``[(k-1)h, kh]``, k = 1..n."""
    C = np.zeros((n, n))
    idx = np.arange(n)
    for term in noise.terms():
        if term.kind == "sep":
            continue
        if term.kind == "diff":
            lags = _diff_lags(term, theta, h, n)
            C += lags[np.abs(idx[:, None] - idx[None, :])]
        elif term.kind == "sum":
            vals = _sum_values(term, theta, h, 2 * n - 1)
            C += vals[idx[:, None] + idx[None, :]]
        elif term.kind == "bi":
            C += _bi_matrix(term, theta, h, n)
        else:
            raise ValueError(term.kind)
    return C


def _propagate(C, decay):
    """``L C L^T`` with ``L[j, k] = decay^(j-k)`` for k <= j."""
    Y = lfilter([1.0], [1.0, -decay], C, axis=0)
    G = lfilter([1.0], [1.0, -decay], Y, axis=1)
    return 0.5 * (G + G.T)


# --------------------------------------------------------------------------
# arbitrary times

def _merge_points(pts, scale):
    pts = np.unique(np.asarray(pts, dtype=float))
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > 1e-12 * scale:
            keep.append(p)
        else:
            keep[-1] = max(keep[-1], p) if p == pts[-1] else keep[-1]
    return np.array(keep)


def _window(t, theta, delta):
    start = max(0.0, t - _WINDOW / theta)
    k = np.arange(0, int(math.ceil((t - start) / delta)) + 1)
    pts = t - k * delta
    pts = pts[pts > start]
    return start, np.concatenate([[start], pts, [t]])


def _panel_cov(noise, theta, a, la, c, lc):
    """Increment covariances between panels ``[a_i, a_i+la_i]`` and ``[c_j, c_j+lc_j]``.

    Panels of the two families must be identical or have disjoint interiors.
    """
    na, nc = a.size, c.size
    A = np.repeat(a, nc)
    LA = np.repeat(la, nc)
    Cs = np.tile(c, na)
    LC = np.tile(lc, na)
    out = np.zeros(na * nc)
    scale = max(float(np.max(a + la)), float(np.max(c + lc)))
    same = (np.abs(A - Cs) <= 1e-12 * scale) & (np.abs(LA - LC) <= 1e-12 * scale)
    for term in noise.terms():
        if term.kind == "sep":
            continue
        if term.kind == "diff":
            D = A - Cs
            gap = np.maximum(A - (Cs + LC), Cs - (A + LA))
            easy = (~same) & (gap >= np.maximum(LA, LC))
            for i in np.flatnonzero(same):
                out[i] += diff_same(term, LA[i], theta)
            _grouped_easy(out, easy, D, LA, LC, lambda d, l1, l2: diff_pairs_easy(term, d, l1, l2, theta))
            for i in np.flatnonzero(~same & ~easy):
                out[i] += diff_pair(term, D[i], LA[i], LC[i], theta)
        elif term.kind == "sum":
            S = A + Cs
            easy = S >= np.maximum(LA, LC)
            _grouped_easy(out, easy, S, LA, LC, lambda s, l1, l2: sum_pairs_easy(term, s, l1, l2, theta))
            for i in np.flatnonzero(~easy):
                out[i] += sum_pair(term, S[i], LA[i], LC[i], theta)
        elif term.kind == "bi":
            out += bi_pairs(term, A, LA, Cs, LC, theta)
    return out.reshape(na, nc)


def _grouped_easy(out, mask, arg, l1, l2, fn):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return
    keys = {}
    for i in idx:
        keys.setdefault((float(l1[i]), float(l2[i])), []).append(i)
    for (x1, x2), members in keys.items():
        members = np.array(members)
        out[members] += fn(arg[members], x1, x2)


def ou_cov(model: OuModelSpec, s, t):
    """``E[X_t X_s]`` for the OU process of ``model`` (``model.n`` is ignored)."""
    s = float(s)
    t = float(t)
    if s < 0 or t < 0:
        raise ParameterDomainError("times must be nonnegative")
    if s == 0.0 or t == 0.0:
        return 0.0
    if max(s, t) > HORIZON_CAP:
        raise ParameterDomainError(f"time {max(s, t)} beyond the horizon cap {HORIZON_CAP}")
    theta = model.theta
    delta = min(2.0 / theta, max(s, t))
    st, pt = _window(t, theta, delta)
    ss, ps = _window(s, theta, delta)
    pts = _merge_points(np.concatenate([pt, ps]), max(s, t))
    edges_t = pts[(pts >= st - 1e-12 * t) & (pts <= t * (1 + 1e-15))]
    edges_s = pts[(pts >= ss - 1e-12 * s) & (pts <= s * (1 + 1e-15))]
    a, la = edges_t[:-1], np.diff(edges_t)
    c, lc = edges_s[:-1], np.diff(edges_s)
    C = _panel_cov(model.noise, theta, a, la, c, lc)
    wt = np.exp(-theta * (t - (a + la)))
    ws = np.exp(-theta * (s - (c + lc)))
    value = float(wt @ C @ ws)
    if not math.isfinite(value):
        raise NumericAccuracyError(f"covariance at ({t}, {s}) is not finite", achieved=math.inf)
    return value


# --------------------------------------------------------------------------
# Gram matrix

@dataclass
class GramMatrix:
    """Covariance ``[E X_{jh} X_{lh}]`` of the observation vector."""

    entries: np.ndarray
    model: OuModelSpec
    method: str
    min_eigenvalue: Optional[float] = None
    _factor: Optional[np.ndarray] = field(default=None, repr=False)
    jitter: float = 0.0

    @property
    def n(self):
        return self.entries.shape[0]

    def leading(self, n):
        """Gram of the first ``n`` observations (same model with smaller n)."""
        if not 1 <= n <= self.n:
            raise ParameterDomainError(f"n={n} outside 1..{self.n}")
        g = GramMatrix(self.entries[:n, :n].copy(), self.model.with_n(n), self.method,
                       jitter=self.jitter)
        if self._factor is not None:
            g._factor = self._factor[:n, :n].copy()
        return g

    def mean_b_n(self):
        """Exact ``E B_n = (1/n) sum_j E X_{jh}^2``."""
        return float(np.trace(self.entries)) / self.n

    def scale(self):
        return float(np.max(np.diag(self.entries)))

    def compute_min_eigenvalue(self):
        if self.min_eigenvalue is None:
            self.min_eigenvalue = float(eigvalsh(self.entries, subset_by_index=[0, 0])[0])
        return self.min_eigenvalue

    def factor(self):
        """Lower Cholesky factor, computed once.

        When the plain factorization fails and the smallest eigenvalue lies
        within ``-1e-8 * scale``, a single diagonal jitter of
        ``1e-10 * scale`` is added and recorded in ``jitter``.
        """
        if self._factor is not None:
            return self._factor
        try:
            self._factor = cholesky(self.entries, lower=True, check_finite=False)
            return self._factor
        except np.linalg.LinAlgError:
            pass
        lam = self.compute_min_eigenvalue()
        sc = self.scale()
        if lam < -1e-8 * sc:
            raise NotPositiveDefiniteError(
                f"Gram matrix is indefinite (min eigenvalue {lam:.3e})", achieved=lam)
        self.jitter = 1e-10 * sc
        try:
            self._factor = cholesky(self.entries + self.jitter * np.eye(self.n), lower=True,
                                    check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("factorization failed after jitter", achieved=lam) from exc
        return self._factor


def closed_form_half(theta, s, t):
    """OU covariance for standard Brownian noise."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return (np.exp(-theta * np.abs(t - s)) - np.exp(-theta * (t + s))) / (2.0 * theta)


def gram_matrix(model: OuModelSpec, method="auto", validate=True) -> GramMatrix:
    """Gram matrix of ``(X_h, ..., X_nh)``.

    ``method`` is ``"auto"`` (closed form for Brownian noise, quadrature
    otherwise), ``"quadrature"`` or ``"closed_form_H_half"``.
    """
    n, h, theta = model.n, model.h, model.theta
    if n * h > HORIZON_CAP:
        raise ParameterDomainError(f"n*h = {n * h} beyond the horizon cap {HORIZON_CAP}")
    half = model.noise.is_fbm and model.noise.hurst == 0.5
    if method == "auto":
        method = "closed_form_H_half" if half else "quadrature"
    if method == "closed_form_H_half":
        if not half:
            raise ParameterDomainError("closed form only applies to fBm with H = 1/2")
        tt = h * np.arange(1, n + 1)
        G = closed_form_half(theta, tt[:, None], tt[None, :])
    elif method == "quadrature":
        C = increment_covariance(model.noise, theta, h, n)
        G = _propagate(C, math.exp(-theta * h))
    else:
        raise ParameterDomainError(f"unknown method {method!r}")
    gram = GramMatrix(G, model, method)
    if validate:
        validate_gram(gram)
    return gram


def validate_gram(gram: GramMatrix):
    G = gram.entries
    d = np.diag(G)
    if not np.all(np.isfinite(G)):
        raise NumericAccuracyError("Gram matrix has non-finite entries")
    if np.any(d <= 0):
        raise NumericAccuracyError("Gram matrix has a nonpositive diagonal entry")
    if not np.array_equal(G, G.T):
        asym = float(np.max(np.abs(G - G.T)))
        if asym > 1e-12 * gram.scale():
            raise NumericAccuracyError(f"Gram matrix asymmetric by {asym:.3e}")
    gram.factor()
    return gram


# --------------------------------------------------------------------------
# stationary covariance and limit variances

def cheridito_coefficients(theta, hurst, terms=4):
    """Coefficients ``c_m`` of ``rho_0(t) ~ sum_m c_m t^(2H - 2m)`` as t -> inf."""
    out = []
    for m in range(1, terms + 1):
        prod = 1.0
        for j in range(2 * m):
            prod *= 2.0 * hurst - j
        out.append(0.5 * theta ** (-2 * m) * prod)
    return np.array(out)


def stationary_asymptotic(theta, hurst, t, terms=4):
    t = np.asarray(t, dtype=float)
    c = cheridito_coefficients(theta, hurst, terms)
    m = np.arange(1, terms + 1)
    return np.sum(c[:, None] * t.reshape(1, -1) ** (2 * hurst - 2 * m[:, None]), axis=0).reshape(t.shape)


@dataclass
class StationaryCov:
    """``rho_0(kh) = E[Y_{kh} Y_0]`` of the stationary fOU solution."""

    theta: float
    h: float
    hurst: float
    values: np.ndarray
    shift: float
    tail_constant: float

    def __getitem__(self, k):
        return self.values[k]


def stationary_cov(theta, h, hurst, max_lag, tol=1e-12) -> StationaryCov:
    """Stationary fOU covariance at lags ``0..max_lag`` (fBm noise).

    The stationary solution at grid times is ``Y_{jh} = sum_{i>=0} q^i
    xi_{j-i}`` with ``q = exp(-theta h)``, so ``rho_0(dh) = sum_m q^|m|
    C(d - m) / (1 - q^2)``.  The sum is cut at ``|m| <= T0/h`` where the
    shift ``T0`` makes both terms of the nonstationarity majorant
    ``e^{-theta T0} 3a`` and ``e^{-theta T0}(1 + max_lag h)^(2H-2)`` smaller
    than ``tol/2``.
    """
    if theta <= 0 or h <= 0:
        raise ParameterDomainError("need theta, h > 0")
    if not 0 < hurst < 1:
        raise ParameterDomainError(f"hurst must lie in (0,1), got {hurst}")
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ParameterDomainError("max_lag must be >= 0")
    a = stationary_variance(theta, hurst)
    env = (1.0 + max_lag * h) ** (2 * hurst - 2)
    t0 = max(math.log(6.0 * a / tol), math.log(2.0 * env / tol), 0.0) / theta
    M = int(math.ceil(t0 / h)) + 1
    if max_lag * h + M * h > HORIZON_CAP:
        raise NumericAccuracyError("tolerance needs a shift beyond the horizon cap")
    q = math.exp(-theta * h)
    lagf = increment_lags(NoiseSpec.fbm(hurst), theta, h, max_lag + M + 1)
    j = np.arange(-M, max_lag + M + 1)
    arr = lagf[np.abs(j)]
    fwd = lfilter([1.0], [1.0, -q], arr)
    bwd = lfilter([1.0], [1.0, -q], arr[::-1])[::-1]
    tot = (fwd + bwd - arr) / (1.0 - q * q)
    values = tot[M:M + max_lag + 1].copy()
    k = np.arange(max(1, max_lag // 2), max_lag + 1)
    tail_c = float(np.max(np.abs(values[k]) * (1.0 + k * h) ** (2 - 2 * hurst))) if max_lag >= 1 else abs(values[0])
    return StationaryCov(theta, h, hurst, values, M * h, tail_c)


@dataclass
class SeriesReport:
    """Value of ``sigma_B^2`` with how it was obtained."""

    value: float
    terms: int
    head: float
    tail: float
    error_bound: float
    envelope_tail_bound: float


def sigma_b_sq_report(theta, h, hurst, tol=1e-10, asymptotic_terms=4) -> SeriesReport:
    """``sigma_B^2 = 2 sum_{j in Z} rho_0(jh)^2`` with an analytic tail.

    Lags ``|j| <= K`` are summed exactly.  Beyond ``K`` the large-lag
    expansion of ``rho_0`` is squared and summed with Hurwitz zeta
    functions.  ``K`` doubles until the bound on the first neglected
    expansion term is below ``tol``.  ``envelope_tail_bound`` is the cruder
    bound ``2 C^2 int_{Kh}^inf x^(4H-4) dx`` from the ``(1+t)^(2H-2)``
    envelope, reported for reference.
    """
    if not 0 < hurst < 0.75:
        raise ParameterDomainError(f"sigma_B^2 is finite only for 0 < H < 3/4, got {hurst}")
    if theta <= 0 or h <= 0:
        raise ParameterDomainError("need theta, h > 0")
    c = cheridito_coefficients(theta, hurst, asymptotic_terms + 1)
    K = max(32, int(math.ceil(40.0 / (theta * h))))
    while True:
        tK = K * h
        e_next = 4 * hurst - 2 - 2 * (asymptotic_terms + 1)
        # first neglected cross term 2 c_1 c_{N+1} t^(4H-2N-4), summed over j > K, doubled for +-j
        bound = 4.0 * abs(c[0] * c[-1]) * h ** e_next * zeta(-e_next, K + 1)
        bound += 2.0 * math.exp(-theta * tK) * tK ** 2
        if bound < tol or K * h > HORIZON_CAP / 4:
            break
        K *= 2
    if bound >= tol:
        raise NumericAccuracyError("sigma_B^2 tail tolerance not reached", achieved=bound)
    sc = stationary_cov(theta, h, hurst, K, tol=min(tol, 1e-12))
    rho = sc.values
    head = rho[0] ** 2 + 2.0 * float(np.sum(rho[1:] ** 2))
    tail = 0.0
    cN = c[:asymptotic_terms]
    for i in range(asymptotic_terms):
        for j in range(asymptotic_terms):
            e = 4 * hurst - 2 * (i + 1) - 2 * (j + 1)
            tail += cN[i] * cN[j] * h ** e * zeta(-e, K + 1)
    tail *= 2.0
    kk = np.arange(max(1, K // 2), K + 1)
    cfit = float(np.max(np.abs(rho[kk]) * (1.0 + kk * h) ** (2 - 2 * hurst)))
    env = 2.0 * 2.0 * cfit ** 2 * (K * h) ** (4 * hurst - 3) / (3 - 4 * hurst) / h
    return SeriesReport(float(2.0 * (head + tail)), K, float(2.0 * head), float(2.0 * tail),
                        float(2.0 * bound), float(env))


def sigma_b_sq(theta, h, hurst, tol=1e-10):
    """Limit variance ``sigma_B^2`` of ``W_n``."""
    return sigma_b_sq_report(theta, h, hurst, tol).value


def limit_variances(model: OuModelSpec, tol=1e-10):
    """``(sigma_B^2, sigma_1^2, a)`` for the model's effective Hurst index.

    ``sigma_1^2 = theta^2 sigma_B^2 / (4 H^2 a^2)`` is the variance of the
    normal limit of ``sqrt(n)(theta_hat - theta)``.
    """
    H = model.hurst
    if not 0 < H < 0.75:
        raise ParameterDomainError(f"limit variances need 0 < H < 3/4, got {H}")
    theta = model.theta
    sb = sigma_b_sq(theta, model.h, H, tol)
    a = stationary_variance(theta, H)
    s1 = theta ** 2 * sb / (4.0 * H * H * a * a)
    gprime = -2.0 * H * H * gamma(2 * H) * theta ** (-2 * H - 1)
    if not math.isclose(s1, sb / gprime ** 2, rel_tol=1e-12):
        raise NumericAccuracyError("delta-method relation violated")
    return sb, s1, a
