"""NumPy implementations of the compiled hot loops."""

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

_CHUNK = 4096


def bi_tensor(a, c, xn, xw, yn, yw, q, k):
    a = np.ascontiguousarray(a, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    out = np.empty(a.size)
    for lo in range(0, a.size, _CHUNK):
        hi = min(lo + _CHUNK, a.size)
        u = a[lo:hi, None] + xn[None, :]
        v = c[lo:hi, None] + yn[None, :]
        uq, vq = u ** q, v ** q
        vw = yw[None, :] * v ** (q - 1.0)
        core = (uq[:, :, None] + vq[:, None, :]) ** (k - 2.0)
        row = np.einsum("mab,mb->ma", core, vw)
        out[lo:hi] = np.einsum("ma,a,ma->m", row, xw, u ** (q - 1.0))
    return out


def ou_filter(inc, decay, weight, stride):
    inc = np.asarray(inc, dtype=float)
    nobs = inc.shape[1] // stride
    path = lfilter([weight], [1.0, -decay], inc[:, : nobs * stride], axis=1)
    return np.ascontiguousarray(path[:, stride - 1::stride])


def ks_normal(xs, sigma):
    xs = np.asarray(xs, dtype=float)
    m = xs.size
    cdf = ndtr(xs / sigma)
    i = np.arange(m)
    return float(max(np.max(np.abs((i + 1) / m - cdf)), np.max(np.abs(i / m - cdf))))
