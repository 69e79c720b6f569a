"""Observation vectors of the OU model: exact Cholesky draws and a
circulant-embedding fGn driver with fine-substep integration."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import cholesky, toeplitz
from threadpoolctl import threadpool_limits

from ._kernels import ou_filter
from .covariance import GramMatrix, OuModelSpec
from .errors import NotPositiveDefiniteError, ParameterDomainError
from .rng import SeedPlan, check_seed

CHOLESKY_EXACT = "cholesky_exact"
SUBSTEP_EULER = "substep_euler"
# every chunk has this many rows (the last one is zero-padded) so that all
# matrix products have identical shapes whatever the worker count
CHUNK = 2048


@dataclass
class PathSample:
    """One draw of ``(X_h, ..., X_nh)``."""

    values: np.ndarray
    model: OuModelSpec
    seed: int
    method: str
    index: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.model.n,):
            raise ParameterDomainError(
                f"path has shape {self.values.shape}, model expects ({self.model.n},)")

    @property
    def n(self):
        return self.values.size


def default_workers():
    env = os.environ.get("FOU_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ParameterDomainError(f"FOU_WORKERS must be an integer, got {env!r}") from None
        if w >= 1:
            return w
    return 1


def map_chunks(count: int, work: Callable[[int, int], np.ndarray], workers: Optional[int] = None,
               chunk: int = CHUNK) -> np.ndarray:
    """Run ``work(start, stop)`` over fixed replicate chunks and concatenate
    the per-replicate results in index order."""
    if count < 1:
        raise ParameterDomainError("count must be >= 1")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ParameterDomainError("workers must be >= 1")
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]
    with threadpool_limits(limits=1):
        if workers == 1 or len(bounds) == 1:
            parts = [work(s, e) for s, e in bounds]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda b: work(*b), bounds))
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------------------
# exact sampling

def _padded_normals(plan: SeedPlan, start, stop, n, chunk):
    z = np.zeros((chunk, n))
    z[: stop - start] = plan.normals(start, stop, n)
    return z


def cholesky_draws(gram: GramMatrix, seed, count, start=0, workers=None, tag=CHOLESKY_EXACT,
                   reducer: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """Replicates ``start .. start+count-1`` of ``N(0, gram)`` as rows.

    ``reducer`` maps a block of paths to per-replicate statistics, which
    avoids holding every path in memory.
    """
    plan = SeedPlan(check_seed(seed), tag)
    L = gram.factor()
    n = gram.n

    def work(s, e):
        z = _padded_normals(plan, start + s, start + e, n, CHUNK)
        x = z @ L.T
        x = x[: e - s]
        return x if reducer is None else reducer(x)

    return map_chunks(count, work, workers)


def cholesky_sample(gram: GramMatrix, seed, count: int, workers=None) -> List[PathSample]:
    """``count`` independent draws of ``N(0, gram)``.

    The Cholesky factor is computed once and reused; a diagonal jitter, if
    one was needed, is recorded in each sample's ``notes``.
    """
    if count < 1:
        raise ParameterDomainError("count must be >= 1")
    rows = cholesky_draws(gram, seed, count, workers=workers)
    notes = {"jitter": gram.jitter} if gram.jitter else {}
    return [PathSample(rows[i], gram.model, int(seed), CHOLESKY_EXACT, i, dict(notes))
            for i in range(count)]


# --------------------------------------------------------------------------
# fractional Gaussian noise by circulant embedding

def fgn_autocov(hurst, h, nlags):
    k = np.arange(nlags, dtype=float)
    p = 2.0 * hurst
    return 0.5 * h ** p * (np.abs(k + 1) ** p - 2.0 * k ** p + np.abs(k - 1) ** p)


@dataclass
class CirculantPlan:
    """Square-root spectrum of the circulant embedding of an fGn covariance."""

    hurst: float
    h: float
    n_steps: int
    method: str
    sqrt_eig: Optional[np.ndarray] = None
    chol: Optional[np.ndarray] = None
    clipped: float = 0.0

    @classmethod
    def build(cls, hurst, h, n_steps):
        if not 0 < hurst < 1:
            raise ParameterDomainError(f"hurst must lie in (0,1), got {hurst}")
        if h <= 0:
            raise ParameterDomainError("h must be > 0")
        if int(n_steps) != n_steps or n_steps < 1:
            raise ParameterDomainError("n_steps must be a positive integer")
        n_steps = int(n_steps)
        gam = fgn_autocov(hurst, h, n_steps + 1)
        row = np.concatenate([gam, gam[-2:0:-1]])
        lam = np.fft.fft(row).real
        top = float(np.max(lam))
        if np.min(lam) >= -1e-10 * top:
            clipped = float(-min(np.min(lam), 0.0))
            lam = np.maximum(lam, 0.0)
            return cls(hurst, h, n_steps, "circulant", np.sqrt(lam / lam.size), clipped=clipped)
        T = toeplitz(gam[:n_steps])
        try:
            L = cholesky(T, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("fGn Toeplitz matrix not positive definite") from exc
        return cls(hurst, h, n_steps, "toeplitz_cholesky", chol=L)

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        if self.sqrt_eig is not None:
            m = self.sqrt_eig.size
            z = gen.standard_normal(m) + 1j * gen.standard_normal(m)
            return np.fft.fft(self.sqrt_eig * z)[: self.n_steps].real
        return self.chol @ gen.standard_normal(self.n_steps)

    def draw_rows(self, plan: SeedPlan, start, stop) -> np.ndarray:
        rows = stop - start
        if self.sqrt_eig is not None:
            m = self.sqrt_eig.size
            z = np.empty((rows, m), dtype=complex)
            for r, i in enumerate(range(start, stop)):
                g = plan.generator(i)
                z[r] = g.standard_normal(m) + 1j * g.standard_normal(m)
            return np.ascontiguousarray(np.fft.fft(self.sqrt_eig * z, axis=1)[:, : self.n_steps].real)
        return np.ascontiguousarray(plan.normals(start, stop, self.n_steps) @ self.chol.T)


def fgn_circulant(hurst, h, n_steps, seed, return_method=False):
    """Fractional Gaussian noise increments ``B_{(k+1)h} - B_{kh}``, k < n_steps.

    Uses the Davies-Harte embedding.  Eigenvalues down to ``-1e-10`` times
    the largest one are clipped to zero; anything more negative switches to
    a Cholesky factor of the Toeplitz covariance.  With ``return_method``
    the generator actually used is returned as well.
    """
    cp = CirculantPlan.build(hurst, h, n_steps)
    out = cp.draw(SeedPlan(check_seed(seed), "fgn").generator(0))
    return (out, cp.method) if return_method else out


# --------------------------------------------------------------------------
# substep integration

def _check_substep_model(model: OuModelSpec, substeps_per_h):
    if not model.noise.is_fbm:
        raise ParameterDomainError("the substep generator supports fBm noise only")
    if int(substeps_per_h) != substeps_per_h or substeps_per_h < 1:
        raise ParameterDomainError("substeps_per_h must be a positive integer")
    return int(substeps_per_h)


def substep_draws(model: OuModelSpec, substeps_per_h, seed, count, start=0, workers=None,
                  reducer=None, tag=SUBSTEP_EULER):
    """Rows of approximate observation vectors from the substep recursion
    ``X <- exp(-theta d) X + exp(-theta d / 2) dB`` with ``d = h / substeps``."""
    m = _check_substep_model(model, substeps_per_h)
    delta = model.h / m
    cp = CirculantPlan.build(model.hurst, delta, model.n * m)
    plan = SeedPlan(check_seed(seed), tag)
    decay = math.exp(-model.theta * delta)
    weight = math.exp(-0.5 * model.theta * delta)

    def work(s, e):
        inc = cp.draw_rows(plan, start + s, start + e)
        x = ou_filter(inc, decay, weight, m)
        return x if reducer is None else reducer(x)

    return map_chunks(count, work, workers, chunk=256)


def ou_path_substep(model: OuModelSpec, substeps_per_h: int, seed, index=0) -> PathSample:
    """One approximate path of the fBm-driven OU model."""
    m = _check_substep_model(model, substeps_per_h)
    row = substep_draws(model, m, seed, 1, start=index, workers=1)[0]
    cp_method = CirculantPlan.build(model.hurst, model.h / m, model.n * m).method
    return PathSample(row, model, int(seed), SUBSTEP_EULER, index,
                      {"substeps_per_h": m, "fgn_method": cp_method})
