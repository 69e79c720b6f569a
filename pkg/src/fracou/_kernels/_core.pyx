# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  Semantics mirror ``_fallback.py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, erfc, fabs, sqrt

cnp.import_array()


def bi_tensor(double[::1] a, double[::1] c, double[::1] xn, double[::1] xw,
              double[::1] yn, double[::1] yw, double q, double k):
    """out[i] = sum_ab xw[a] yw[b] (u^q + v^q)^(k-2) (u v)^(q-1), u = a_i + xn, v = c_i + yn."""
    cdef Py_ssize_t m = a.shape[0], nx = xn.shape[0], ny = yn.shape[0]
    cdef Py_ssize_t i, ia, ib
    cdef double u, v, uq, acc, row, qm1 = q - 1.0, km2 = k - 2.0
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] vq = np.empty(ny, dtype=np.float64)
    cdef double[::1] vw = np.empty(ny, dtype=np.float64)
    with nogil:
        for i in range(m):
            for ib in range(ny):
                v = c[i] + yn[ib]
                vq[ib] = pow(v, q)
                vw[ib] = yw[ib] * pow(v, qm1)
            acc = 0.0
            for ia in range(nx):
                u = a[i] + xn[ia]
                uq = pow(u, q)
                row = 0.0
                for ib in range(ny):
                    row += vw[ib] * pow(uq + vq[ib], km2)
                acc += xw[ia] * pow(u, qm1) * row
            o[i] = acc
    return out


def ou_filter(double[:, ::1] inc, double decay, double weight, Py_ssize_t stride):
    """Run x <- decay * x + weight * inc[j] from x = 0, keep every stride-th state."""
    cdef Py_ssize_t m = inc.shape[0], nfine = inc.shape[1]
    cdef Py_ssize_t nobs = nfine // stride
    cdef Py_ssize_t i, j, r
    cdef double x
    out = np.empty((m, nobs), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            x = 0.0
            r = 0
            for j in range(nobs * stride):
                x = decay * x + weight * inc[i, j]
                if (j + 1) % stride == 0:
                    o[i, r] = x
                    r += 1
    return out


def ks_normal(double[::1] xs, double sigma):
    """Kolmogorov distance between the empirical CDF of sorted xs and N(0, sigma^2)."""
    cdef Py_ssize_t m = xs.shape[0], i
    cdef double cdf, lo, hi, best = 0.0
    cdef double inv = 1.0 / (sigma * sqrt(2.0))
    cdef double dm = <double> m
    with nogil:
        for i in range(m):
            cdf = 0.5 * erfc(-xs[i] * inv)
            hi = fabs((i + 1) / dm - cdf)
            lo = fabs(i / dm - cdf)
            if hi > best:
                best = hi
            if lo > best:
                best = lo
    return best
