"""Time the compiled hot loops against their NumPy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each line reports the best wall time of both backends and the speedup, and
checks that the two results agree.
"""

import argparse
import time

import numpy as np

from fracou import _kernels
from fracou._kernels import fallback


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    xn, xw = np.polynomial.legendre.leggauss(16)
    xn, xw = 0.5 * (xn + 1), 0.5 * xw
    a = rng.uniform(0.5, 50, 4000)
    c = rng.uniform(0.5, 50, 4000)
    yield "bi_tensor (4000 pairs, 16x16 nodes)", "bi_tensor", (a, c, xn, xw, xn.copy(), xw.copy(), 1.5, 0.8)
    inc = rng.standard_normal((256, 128 * 64))
    yield "ou_filter (256 rows, 8192 substeps)", "ou_filter", (inc, 0.99, 0.995, 128)
    xs = np.sort(rng.standard_normal(100000))
    yield "ks_normal (1e5 sorted samples)", "ks_normal", (xs, 1.0)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled extension not available; only the fallback can run")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'cython [s]':>12s} {'numpy [s]':>12s} {'speedup':>8s} {'max rel gap':>12s}")
    for label, name, fargs in cases(rng):
        tc, rc = best_of(lambda: getattr(_kernels.compiled, name)(*fargs), args.repeat)
        tf, rf = best_of(lambda: getattr(fallback, name)(*fargs), args.repeat)
        rc, rf = np.asarray(rc, dtype=float), np.asarray(rf, dtype=float)
        gap = float(np.max(np.abs(rc - rf) / np.maximum(np.abs(rf), 1e-300)))
        print(f"{label:40s} {tc:12.4f} {tf:12.4f} {tf / tc:8.2f} {gap:12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
