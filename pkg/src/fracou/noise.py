"""Covariance kernels of the Gaussian driving noises.

Five families are supported: fractional Brownian motion and four relatives
(sub-fractional, bi-fractional, sub-bifractional and generalized fBm).  Each
kernel is also exposed as a sum of elementary terms, which is what the
covariance engine in :mod:`fracou.covariance` integrates.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterDomainError


class Family(str, Enum):
    FBM = "fbm"
    SUB_FBM = "sub_fbm"
    BI_FBM = "bi_fbm"
    SUB_BI_FBM = "sub_bi_fbm"
    GENERALIZED_FBM = "generalized_fbm"


_ALIASES = {
    "fbm": Family.FBM,
    "subfbm": Family.SUB_FBM,
    "sub_fbm": Family.SUB_FBM,
    "bifbm": Family.BI_FBM,
    "bi_fbm": Family.BI_FBM,
    "subbifbm": Family.SUB_BI_FBM,
    "sub_bi_fbm": Family.SUB_BI_FBM,
    "generalizedfbm": Family.GENERALIZED_FBM,
    "generalized_fbm": Family.GENERALIZED_FBM,
    "gfbm": Family.GENERALIZED_FBM,
}


def parse_family(name):
    if isinstance(name, Family):
        return name
    key = str(name).strip().lower().replace("-", "_")
    try:
        return _ALIASES[key]
    except KeyError:
        try:
            return _ALIASES[key.replace("_", "")]
        except KeyError:
            raise ParameterDomainError(f"unknown noise family {name!r}") from None


@dataclass(frozen=True)
class KernelTerm:
    """One elementary piece ``coef * shape(u, v)`` of a covariance kernel.

    kind is one of
      ``"sep"``  coef * (u**p + v**p)
      ``"diff"`` coef * |u - v|**p
      ``"sum"``  coef * (u + v)**p
      ``"bi"``   coef * (u**q + v**q)**k
    """

    kind: str
    coef: float
    p: float = 0.0
    q: float = 0.0
    k: float = 1.0


@dataclass(frozen=True)
class NoiseSpec:
    """Which Gaussian noise drives the OU equation.

    ``hurst`` is the effective Hurst index.  For the bi-fractional families
    pass ``hprime`` and ``k``; ``hurst`` is then derived as ``hprime * k``.
    """

    family: Family = Family.FBM
    hurst: Optional[float] = None
    hprime: Optional[float] = None
    k: Optional[float] = None
    gfbm_a: Optional[float] = None
    gfbm_b: Optional[float] = None

    def __post_init__(self):
        fam = parse_family(self.family)
        object.__setattr__(self, "family", fam)
        if fam in (Family.BI_FBM, Family.SUB_BI_FBM):
            if self.hprime is None or self.k is None:
                raise ParameterDomainError(f"{fam.value} needs hprime and k")
            hp, k = float(self.hprime), float(self.k)
            if not 0.0 < hp < 1.0:
                raise ParameterDomainError(f"hprime must lie in (0,1), got {hp}")
            if not 0.0 < k < 2.0:
                raise ParameterDomainError(f"k must lie in (0,2), got {k}")
            h = hp * k
            if self.hurst is not None and abs(float(self.hurst) - h) > 1e-12:
                raise ParameterDomainError(
                    f"hurst={self.hurst} inconsistent with hprime*k={h}")
            object.__setattr__(self, "hprime", hp)
            object.__setattr__(self, "k", k)
            object.__setattr__(self, "hurst", h)
        elif self.hurst is None:
            raise ParameterDomainError(f"{fam.value} needs hurst")
        else:
            object.__setattr__(self, "hurst", float(self.hurst))
        if not 0.0 < self.hurst < 1.0:
            raise ParameterDomainError(f"effective Hurst index must lie in (0,1), got {self.hurst}")
        if fam is Family.GENERALIZED_FBM:
            if self.gfbm_a is None or self.gfbm_b is None:
                raise ParameterDomainError("generalized_fbm needs gfbm_a and gfbm_b")
            a, b = float(self.gfbm_a), float(self.gfbm_b)
            if a == 0.0 and b == 0.0:
                raise ParameterDomainError("generalized_fbm needs (a, b) != (0, 0)")
            object.__setattr__(self, "gfbm_a", a)
            object.__setattr__(self, "gfbm_b", b)

    # constructors -------------------------------------------------------
    @classmethod
    def fbm(cls, hurst):
        return cls(Family.FBM, hurst=hurst)

    @classmethod
    def sub_fbm(cls, hurst):
        return cls(Family.SUB_FBM, hurst=hurst)

    @classmethod
    def bi_fbm(cls, hprime, k):
        return cls(Family.BI_FBM, hprime=hprime, k=k)

    @classmethod
    def sub_bi_fbm(cls, hprime, k):
        return cls(Family.SUB_BI_FBM, hprime=hprime, k=k)

    @classmethod
    def generalized_fbm(cls, hurst, a, b):
        return cls(Family.GENERALIZED_FBM, hurst=hurst, gfbm_a=a, gfbm_b=b)

    @property
    def is_fbm(self):
        return self.family is Family.FBM

    def baseline(self):
        """The fBm with the same effective Hurst index."""
        return NoiseSpec.fbm(self.hurst)

    def to_dict(self):
        d = {"family": self.family.value, "hurst": self.hurst}
        if self.family in (Family.BI_FBM, Family.SUB_BI_FBM):
            d.update(hprime=self.hprime, k=self.k)
        if self.family is Family.GENERALIZED_FBM:
            d.update(gfbm_a=self.gfbm_a, gfbm_b=self.gfbm_b)
        return d

    def terms(self) -> List[KernelTerm]:
        """Decomposition of the kernel into elementary terms."""
        H = self.hurst
        p = 2.0 * H
        fam = self.family
        if fam is Family.FBM:
            return [KernelTerm("sep", 0.5, p), KernelTerm("diff", -0.5, p)]
        if fam is Family.SUB_FBM:
            return [KernelTerm("sep", 1.0, p), KernelTerm("sum", -0.5, p),
                    KernelTerm("diff", -0.5, p)]
        if fam is Family.BI_FBM:
            c = 2.0 ** (-self.k)
            return [KernelTerm("bi", c, q=2.0 * self.hprime, k=self.k),
                    KernelTerm("diff", -c, p)]
        if fam is Family.SUB_BI_FBM:
            return [KernelTerm("bi", 1.0, q=2.0 * self.hprime, k=self.k),
                    KernelTerm("sum", -0.5, p), KernelTerm("diff", -0.5, p)]
        a, b = self.gfbm_a, self.gfbm_b
        n2 = a * a + b * b
        return [KernelTerm("sep", (a + b) ** 2 / (2.0 * n2), p),
                KernelTerm("sum", -a * b / n2, p), KernelTerm("diff", -0.5, p)]


def abs_pow(delta, p):
    """``|delta|**p`` with an exact zero at ``delta == 0``."""
    d = np.abs(np.asarray(delta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d == 0.0, 0.0, d ** p)
    return out


def _check_times(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ParameterDomainError("kernel times must be nonnegative")
    return s, t


def kernel_cov(noise: NoiseSpec, s, t):
    """Covariance ``R(s, t)`` of the noise; broadcasts over arrays.

    The expressions are written symmetrically so that ``R(s, t) == R(t, s)``
    holds bit for bit.
    """
    s, t = _check_times(s, t)
    fam = noise.family
    H = noise.hurst
    p = 2.0 * H
    sp, tp = abs_pow(s, p), abs_pow(t, p)
    dp = abs_pow(t - s, p)
    if fam is Family.FBM:
        out = 0.5 * ((sp + tp) - dp)
    elif fam is Family.SUB_FBM:
        out = (sp + tp) - 0.5 * (abs_pow(s + t, p) + dp)
    elif fam is Family.BI_FBM:
        q = 2.0 * noise.hprime
        base = abs_pow(s, q) + abs_pow(t, q)
        out = 2.0 ** (-noise.k) * (abs_pow(base, noise.k) - dp)
    elif fam is Family.SUB_BI_FBM:
        q = 2.0 * noise.hprime
        base = abs_pow(s, q) + abs_pow(t, q)
        out = abs_pow(base, noise.k) - 0.5 * (abs_pow(s + t, p) + dp)
    else:
        a, b = noise.gfbm_a, noise.gfbm_b
        n2 = a * a + b * b
        out = ((a + b) ** 2 / (2.0 * n2)) * (sp + tp) - (a * b / n2) * abs_pow(s + t, p) - 0.5 * dp
    if out.ndim == 0:
        return float(out)
    return out


def kernel_from_terms(terms: Sequence[KernelTerm], s, t):
    """Evaluate a kernel from its term list (used to cross-check ``terms``)."""
    s, t = _check_times(s, t)
    out = np.zeros(np.broadcast(s, t).shape)
    for term in terms:
        if term.kind == "sep":
            out = out + term.coef * (abs_pow(s, term.p) + abs_pow(t, term.p))
        elif term.kind == "diff":
            out = out + term.coef * abs_pow(t - s, term.p)
        elif term.kind == "sum":
            out = out + term.coef * abs_pow(s + t, term.p)
        elif term.kind == "bi":
            out = out + term.coef * abs_pow(abs_pow(s, term.q) + abs_pow(t, term.q), term.k)
        else:
            raise ValueError(term.kind)
    return out


def kernel_matrix(noise: NoiseSpec, times):
    """``[R(t_i, t_j)]`` for a vector of times."""
    t = np.asarray(times, dtype=float)
    return kernel_cov(noise, t[:, None], t[None, :])


# --------------------------------------------------------------------------
# hypothesis checks

@dataclass
class BoundReport:
    """Empirical sup of ``lhs / majorant`` over a grid."""

    name: str
    sup_ratio: float
    argmax: Tuple[float, ...]
    ratios: List[float] = field(default_factory=list)
    points: List[Tuple[float, ...]] = field(default_factory=list)
    inner_sup_ratio: Optional[float] = None
    diverging: bool = False
    passed: Optional[bool] = None
    notes: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "sup_ratio": self.sup_ratio,
            "inner_sup_ratio": self.inner_sup_ratio,
            "argmax": list(self.argmax),
            "diverging": self.diverging,
            "passed": self.passed,
            "notes": self.notes,
            "points": [list(p) for p in self.points],
            "ratios": list(self.ratios),
        }


def _difference_kernel(noise):
    base = noise.baseline()

    def d(s, t):
        return kernel_cov(noise, s, t) - kernel_cov(base, s, t)

    return d


def _mixed_fd(func, s, t, eta):
    return (func(s + eta, t + eta) - func(s + eta, t - eta)
            - func(s - eta, t + eta) + func(s - eta, t - eta)) / (4.0 * eta * eta)


def mixed_partial_difference(noise, s, t, eta=None, richardson=True):
    """Central finite-difference estimate of d/ds d/dt (R - R^B) at (s, t).

    The default step is ``1e-4 * min(s, t, |t - s|)``; one Richardson step
    combines the estimates at ``eta`` and ``eta / 2``.
    """
    s = float(s)
    t = float(t)
    if s <= 0 or t <= 0 or s == t:
        raise ParameterDomainError("mixed partial needs 0 < s != t (axes and diagonal are singular)")
    if eta is None:
        eta = 1e-4 * min(s, t, abs(t - s))
    d = _difference_kernel(noise)
    coarse = _mixed_fd(d, s, t, eta)
    if not richardson:
        return coarse
    fine = _mixed_fd(d, s, t, 0.5 * eta)
    return (4.0 * fine - coarse) / 3.0


def h3_majorant(noise, s, t):
    H = noise.hurst
    return (t * s) ** (H - 1.0)


def h3prime_majorant(noise, s, t, c1=1.0, c2=1.0):
    H = noise.hurst
    hp = noise.hprime if noise.hprime is not None else H
    k = noise.k if noise.k is not None else 1.0
    return (c1 * (t + s) ** (2.0 * H - 2.0)
            + c2 * (s ** (2 * hp) + t ** (2 * hp)) ** (k - 2.0) * (s * t) ** (2 * hp - 1.0))


def hypothesis_h3_check(noise: NoiseSpec, grid, hypothesis=None, divergence_factor=1.1):
    """Sup over ``grid`` of |mixed partial of (R - R^B)| / majorant.

    ``hypothesis`` is ``"h3"`` (majorant ``(ts)^(H-1)``) or ``"h3prime"``
    (``(t+s)^(2H-2) + (s^2H' + t^2H')^(K-2) (st)^(2H'-1)`` with unit
    constants).  It defaults to h3prime for the bi-fractional families.

    The report flags divergence when the sup over the whole grid exceeds the
    sup over the inner half of the grid (in log scale) by more than
    ``divergence_factor``.
    """
    if hypothesis is None:
        hypothesis = "h3prime" if noise.family in (Family.BI_FBM, Family.SUB_BI_FBM) else "h3"
    if hypothesis not in ("h3", "h3prime"):
        raise ParameterDomainError(f"unknown hypothesis {hypothesis!r}")
    pts = []
    for s, t in grid:
        s, t = float(s), float(t)
        if s <= 0 or t <= 0 or s == t:
            raise ParameterDomainError(f"grid point {(s, t)} touches an axis or the diagonal")
        pts.append((min(s, t), max(s, t)))
    if not pts:
        raise ParameterDomainError("empty grid")
    major = h3_majorant if hypothesis == "h3" else h3prime_majorant
    ratios = []
    for s, t in pts:
        val = mixed_partial_difference(noise, s, t)
        ratios.append(abs(val) / major(noise, s, t))
    ratios_arr = np.array(ratios)
    i = int(np.argmax(ratios_arr))
    sup = float(ratios_arr[i])
    # inner region: both coordinates within the central half of the log range
    coords = np.log(np.array(pts))
    lo, hi = coords.min(), coords.max()
    q1, q3 = lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)
    inner = np.all((coords >= q1) & (coords <= q3), axis=1)
    inner_sup = float(ratios_arr[inner].max()) if inner.any() else None
    diverging = bool(inner_sup is not None and sup > divergence_factor * inner_sup and inner_sup > 0)
    return BoundReport(
        name=hypothesis,
        sup_ratio=sup,
        argmax=pts[i],
        ratios=[float(r) for r in ratios_arr],
        points=pts,
        inner_sup_ratio=inner_sup,
        diverging=diverging,
        passed=bool(np.isfinite(sup) and not diverging),
    )


def standard_grid(values=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0)):
    """Off-diagonal grid ``{(s, t): s < t}`` over ``values``."""
    v = sorted(float(x) for x in values)
    return [(s, t) for i, s in enumerate(v) for t in v[i + 1:]]
