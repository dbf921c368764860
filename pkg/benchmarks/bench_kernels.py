#!/usr/bin/env python
"""
Benchmark the numba kernels against the pure-numpy fallback.

Times point unfolding and word application on the four-disk test scene for a
range of batch sizes, checks that both backends agree, and reports speedups.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 1000 10000 100000
    python benchmarks/bench_kernels.py --depth 40 --output results.json
"""

import argparse
import json
import platform
import time

import numpy as np

from schottkylab import kernels
from schottkylab.kernels import numba_impl, numpy_impl
from schottkylab.schottky import SchottkySet

FOUR = SchottkySet.from_disks([[0, 0], [1, 0.1], [0.3, 0.9], [-0.6, 0.7]], [0.3, 0.25, 0.2, 0.22])


def make_points(n, seed=0):
    """Points concentrated near the removed disks so unfolding does real work."""
    rng = np.random.default_rng(seed)
    kinds, centers, radii = FOUR.packed
    j = rng.integers(len(radii), size=n)
    th = rng.uniform(0, 2 * np.pi, n)
    rho = radii[j] * np.sqrt(rng.uniform(0.0, 1.0, n))
    pts = centers[j] + rho[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    return pts, np.zeros(n, dtype=bool)


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def warmup_jit(depth):
    if numba_impl is None:
        return
    print("Warming up JIT compilation...")
    pts, inf = make_points(16)
    kinds, centers, radii = FOUR.packed
    res = numba_impl.unfold_points(pts, inf, kinds, centers, radii, depth, kernels.BOUNDARY_TOL)
    numba_impl.apply_words(res[2], res[3], res[0], res[1], kinds, centers, radii)
    print("JIT warmup complete.\n")


def benchmark(sizes, depth, repeats):
    kinds, centers, radii = FOUR.packed
    tol = kernels.BOUNDARY_TOL
    results = []

    print(f"{'=' * 78}")
    print(f"UNFOLD + APPLY_WORDS BENCHMARK (max depth {depth}, best of {repeats})")
    print(f"{'=' * 78}")
    print(f"{'points':>10} {'op':>8} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9} {'max diff':>10}")
    print("-" * 66)

    for n in sizes:
        pts, inf = make_points(n)

        def run_unfold(impl):
            return impl.unfold_points(pts, inf, kinds, centers, radii, depth, tol)

        t_np, ref = best_of(lambda: run_unfold(numpy_impl), repeats)
        if numba_impl is not None:
            t_nb, got = best_of(lambda: run_unfold(numba_impl), repeats)
            same_words = np.array_equal(got[1], ref[1])
            diff = float(np.abs(got[2] - ref[2]).max()) if same_words else np.inf
        else:
            t_nb, diff = np.inf, np.nan
        row = {"points": n, "op": "unfold", "numba_time": t_nb, "numpy_time": t_np,
               "speedup": t_np / t_nb, "max_abs_diff": diff,
               "mean_word_length": float(ref[1].mean())}
        results.append(row)
        print(f"{n:>10} {'unfold':>8} {t_nb:>12.5f} {t_np:>12.5f} {row['speedup']:>8.1f}x {diff:>10.1e}")

        words, lengths, term, term_inf = ref[0], ref[1], ref[2], ref[3]

        def run_apply(impl):
            return impl.apply_words(term, term_inf, words, lengths, kinds, centers, radii)

        t_np, ref_a = best_of(lambda: run_apply(numpy_impl), repeats)
        if numba_impl is not None:
            t_nb, got_a = best_of(lambda: run_apply(numba_impl), repeats)
            diff = float(np.abs(got_a[0] - ref_a[0]).max())
        else:
            t_nb, diff = np.inf, np.nan
        row = {"points": n, "op": "apply", "numba_time": t_nb, "numpy_time": t_np,
               "speedup": t_np / t_nb, "max_abs_diff": diff}
        results.append(row)
        print(f"{n:>10} {'apply':>8} {t_nb:>12.5f} {t_np:>12.5f} {row['speedup']:>8.1f}x {diff:>10.1e}")

    return results


def main():
    parser = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    parser.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    parser.add_argument("--depth", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--output", help="write results as JSON")
    args = parser.parse_args()

    warmup_jit(args.depth)
    results = benchmark(args.sizes, args.depth, args.repeats)

    if args.output:
        payload = {
            "python": platform.python_version(),
            "numba_available": numba_impl is not None,
            "active_backend": kernels.BACKEND,
            "depth": args.depth,
            "results": results,
        }
        with open(args.output, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"\nResults written to {args.output}")


if __name__ == "__main__":
    main()
