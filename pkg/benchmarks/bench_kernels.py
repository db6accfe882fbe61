#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Imports both backends directly (bypassing the import-time selection in
``budgetrank._kernels``) and times the two hot kernels on representative
workload sizes, reporting best-of-N wall time and the speedup. Also checks
that the two backends agree numerically on every benchmarked input.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from budgetrank._kernels import pure

try:
    from budgetrank._kernels import _fast
except ImportError:
    _fast = None


def _grad_problem(rng, n, dim, sectors):
    Z = rng.normal(size=(n, dim))
    P = rng.normal(size=(sectors, dim))
    counts = rng.integers(1, 4, size=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    idx = rng.integers(0, sectors, size=int(indptr[-1])).astype(np.int64)
    return Z, P, indptr, idx, 0.07


def _split_problem(rng, n):
    xs = np.sort(rng.normal(size=n))
    gs = rng.normal(size=n)
    return xs, gs


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    if _fast is None:
        print("compiled backend unavailable; build the extension first "
              "(pip install -e . --no-build-isolation)")
        return 1

    rng = np.random.default_rng(7)
    rows = []

    for n, dim, sectors in [(64, 64, 81), (256, 256, 81), (1024, 768, 81)]:
        Z, P, indptr, idx, temp = _grad_problem(rng, n, dim, sectors)
        loss_f, dZ_f, dP_f = _fast.cosine_softmax_grad(Z, P, indptr, idx, temp)
        loss_p, dZ_p, dP_p = pure.cosine_softmax_grad(Z, P, indptr, idx, temp)
        err = max(abs(loss_f - loss_p),
                  float(np.max(np.abs(dZ_f - dZ_p))),
                  float(np.max(np.abs(dP_f - dP_p))))
        t_fast = _best_of(
            lambda: _fast.cosine_softmax_grad(Z, P, indptr, idx, temp),
            args.repeats)
        t_pure = _best_of(
            lambda: pure.cosine_softmax_grad(Z, P, indptr, idx, temp),
            args.repeats)
        rows.append((f"cosine_softmax_grad n={n} D={dim} S={sectors}",
                     t_fast, t_pure, err))

    for n in [1_000, 10_000, 100_000]:
        xs, gs = _split_problem(rng, n)
        gain_f, thr_f = _fast.best_split_sorted(xs, gs)
        gain_p, thr_p = pure.best_split_sorted(xs, gs)
        err = max(abs(gain_f - gain_p), abs(thr_f - thr_p))
        t_fast = _best_of(lambda: _fast.best_split_sorted(xs, gs), args.repeats)
        t_pure = _best_of(lambda: pure.best_split_sorted(xs, gs), args.repeats)
        rows.append((f"best_split_sorted n={n}", t_fast, t_pure, err))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel / size':<{width}}  {'compiled':>10}  {'pure':>10}  "
          f"{'speedup':>8}  {'max diff':>9}")
    for name, t_fast, t_pure, err in rows:
        print(f"{name:<{width}}  {t_fast * 1e3:>8.3f}ms  {t_pure * 1e3:>8.3f}ms  "
              f"{t_pure / t_fast:>7.2f}x  {err:>9.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
