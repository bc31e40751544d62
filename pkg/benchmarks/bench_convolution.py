"""Timing comparison: naive stencil vs separable passes, per kernel backend.

Usage: python benchmarks/bench_convolution.py [--repeats N]

Reports the best wall time over N repeats for each (cell, method, backend)
combination, plus the resulting speedups. The numba rows disappear when
numba is not importable or ENFLOLAB_NUMBA=0 was set before startup.
"""

import argparse
import time

import numpy as np

from enflolab.averaging import build_even_box, convolve, convolve_box_separable
from enflolab.kernels import AVAILABLE_BACKENDS, force_backend
from enflolab.torus import FunctionTable, TorusGeometry

CELLS = (
    (2, 12, 5, 4),
    (3, 16, 7, 4),
    (3, 32, 9, 2),
)


def best_time(call, repeats):
    call()  # warm caches and trigger any jit compilation
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        call()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    header = f"{'cell':>16} {'method':>10} {'backend':>8} {'best (ms)':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n, m, k, d in CELLS:
        g = TorusGeometry(n, m)
        f = FunctionTable.random_gaussian(g, d, rng)
        support = build_even_box(g, range(n), k)
        support.index_table  # exclude table construction from the timings
        cell = f"n={n} m={m} k={k} d={d}"
        rows = {}
        for backend in AVAILABLE_BACKENDS:
            with force_backend(backend):
                rows[("naive", backend)] = best_time(
                    lambda: convolve(f, support), args.repeats
                )
                rows[("separable", backend)] = best_time(
                    lambda: convolve_box_separable(f, range(n), k), args.repeats
                )
        base = rows[("naive", "numpy")]
        for (method, backend), t in rows.items():
            print(
                f"{cell:>16} {method:>10} {backend:>8} {t * 1e3:>10.3f} {base / t:>7.1f}x"
            )
        print()


if __name__ == "__main__":
    main()
