#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times each hot kernel on realistic sizes and prints a speedup table.
The numba versions are warmed before timing so JIT compilation is not
measured.

    python benchmarks/bench_kernels.py [--repeats 5] [--scale 1.0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mousetrail.kernels import _numba, _numpy
from mousetrail.trees import bin_features


def time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_rolling(rng, scale, repeats):
    kinds = rng.integers(0, 4, int(1_000_000 * scale)).astype(np.int8)
    args = (kinds, 10, 2)
    _numba.rolling_drag_counts(*args)
    return ("rolling_drag_counts (1M events)",
            time_call(_numpy.rolling_drag_counts, *args, repeats=repeats),
            time_call(_numba.rolling_drag_counts, *args, repeats=repeats))


def bench_cosine(rng, scale, repeats):
    n_s, n_q, d = int(500 * scale), 60, 38
    unit = rng.random((n_s, n_q, d))
    unit /= np.linalg.norm(unit, axis=2, keepdims=True)
    has = rng.random((n_s, n_q)) > 0.6
    unit[~has] = 0.0
    unit = np.ascontiguousarray(unit)
    _numba.pairwise_mean_cosine(unit, has)
    return (f"pairwise_mean_cosine ({n_s} students x {n_q} questions)",
            time_call(_numpy.pairwise_mean_cosine, unit, has, repeats=repeats),
            time_call(_numba.pairwise_mean_cosine, unit, has, repeats=repeats))


def bench_sqdist(rng, scale, repeats):
    pts = rng.random((int(1_500 * scale), 150))
    _numba.pairwise_sqdist(pts[:10])
    return (f"pairwise_sqdist ({pts.shape[0]} x {pts.shape[1]})",
            time_call(_numpy.pairwise_sqdist, pts, repeats=repeats),
            time_call(_numba.pairwise_sqdist, pts, repeats=repeats))


def bench_tree_gini(rng, scale, repeats):
    n, d = int(3_000 * scale), 150
    x = rng.random((n, d))
    binned = bin_features(x)
    y = rng.integers(0, 4, n).astype(np.int64)
    idx = rng.integers(0, n, n).astype(np.int64)
    stream = rng.integers(0, 2 ** 32, 60_000).astype(np.uint32)
    args = (binned.codes_t, binned.bins_per_feature, y, idx, 4, 5, 1, 13, stream)
    _numba.grow_tree_gini(*args)
    return (f"grow_tree_gini ({n} x {d}, depth 5, 13 features/split)",
            time_call(_numpy.grow_tree_gini, *args, repeats=repeats),
            time_call(_numba.grow_tree_gini, *args, repeats=repeats))


def bench_tree_mse(rng, scale, repeats):
    n, d = int(3_000 * scale), 150
    x = rng.random((n, d))
    binned = bin_features(x)
    g = rng.normal(0, 1, n)
    w = np.abs(g) * (1 - np.abs(g))
    idx = np.arange(n, dtype=np.int64)
    stream = np.zeros(1, dtype=np.uint32)
    args = (binned.codes_t, binned.bins_per_feature, g, w, idx, 5, 1, d, stream,
            0.75, 1e-10)
    _numba.grow_tree_mse(*args)
    return (f"grow_tree_mse ({n} x {d}, depth 5, all features)",
            time_call(_numpy.grow_tree_mse, *args, repeats=repeats),
            time_call(_numba.grow_tree_mse, *args, repeats=repeats))


def bench_apply(rng, scale, repeats):
    n, d = int(3_000 * scale), 150
    x = rng.random((n, d))
    binned = bin_features(x)
    y = rng.integers(0, 4, n).astype(np.int64)
    idx = np.arange(n, dtype=np.int64)
    stream = np.zeros(1, dtype=np.uint32)
    feature, thr_bin, left, right, _, _, _ = _numpy.grow_tree_gini(
        binned.codes_t, binned.bins_per_feature, y, idx, 4, 5, 1, d, stream)
    threshold = np.zeros(feature.shape[0])
    for i in range(feature.shape[0]):
        if feature[i] >= 0:
            threshold[i] = binned.thresholds[feature[i]][thr_bin[i]]
    args = (x, feature, threshold, left, right)
    _numba.tree_apply(*args)
    return (f"tree_apply ({n} rows)",
            time_call(_numpy.tree_apply, *args, repeats=repeats),
            time_call(_numba.tree_apply, *args, repeats=repeats))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0,
                        help="scale factor for problem sizes")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    benches = (bench_rolling, bench_cosine, bench_sqdist, bench_tree_gini,
               bench_tree_mse, bench_apply)
    print(f"{'kernel':<55} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    print("-" * 86)
    for bench in benches:
        name, t_numpy, t_numba = bench(rng, args.scale, args.repeats)
        print(f"{name:<55} {t_numpy * 1e3:>8.2f}ms {t_numba * 1e3:>8.2f}ms "
              f"{t_numpy / t_numba:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
