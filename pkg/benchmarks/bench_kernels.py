#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5]

Times the two hot kernels (CSR spmm and k-hop neighbourhood means) on SBM
graphs of growing size with both backends, regardless of TTPROMPT_BACKEND.
The first numba call per kernel is excluded (JIT compilation).
"""

import argparse
import time

import numpy as np

from ttprompt.encoder import normalize_adjacency
from ttprompt.graph import generate_sbm
from ttprompt.kernels import numpy_impl

try:
    from ttprompt.kernels import numba_impl
except ImportError:
    numba_impl = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench(repeats):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}{'N':>8}{'numpy (ms)':>14}{'numba (ms)':>14}{'speedup':>10}")
    for n_per_block in (100, 400, 800):
        n = 5 * n_per_block
        g = generate_sbm([n_per_block] * 5, 0.02, 0.002, 8, 1.0, seed=1)
        a = normalize_adjacency(g)
        x = rng.standard_normal((n, 64))

        cases = [
            ("spmm", lambda impl: impl.spmm(a.row_offsets, a.col_indices, a.values, x)),
            ("khop_mean", lambda impl: impl.khop_mean(
                g.csr_row_offsets, g.csr_col_indices, x, 2)),
        ]
        for name, call in cases:
            t_np = best_of(lambda: call(numpy_impl), repeats)
            if numba_impl is not None:
                call(numba_impl)  # compile outside the timed region
                t_nb = best_of(lambda: call(numba_impl), repeats)
                ratio = f"{t_np / t_nb:10.1f}x"
                nb_ms = f"{1e3 * t_nb:14.2f}"
            else:
                nb_ms = f"{'n/a':>14}"
                ratio = f"{'n/a':>10}"
            print(f"{name:<12}{n:>8}{1e3 * t_np:>14.2f}{nb_ms}{ratio}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    bench(parser.parse_args().repeats)
