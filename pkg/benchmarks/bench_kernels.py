"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 5]

Both backends must return bit-identical results; this script verifies
that while timing them, then prints a small table with speedups.
"""
import argparse
import time

import numpy as np

from genefunnel._kernels import _fallback

try:
    from genefunnel._kernels import _core
except ImportError:
    _core = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_best_split(rng, m, n, repeats):
    x = rng.normal(size=(m, n))
    g = rng.normal(size=m)
    h = rng.uniform(0.1, 2.0, size=m)
    t_py, r_py = _time(lambda: _fallback.best_split(x, g, h, 1.0, 0.0),
                       repeats)
    xc = np.ascontiguousarray(x)
    t_c, r_c = _time(lambda: _core.best_split(xc, g, h, 1.0, 0.0), repeats)
    assert r_py == r_c, "backend results diverged"
    return t_py, t_c


def bench_knn(rng, m, n, q, k, repeats):
    train = rng.normal(size=(m, n))
    labels = rng.integers(0, 2, size=m)
    test = rng.normal(size=(q, n))
    t_py, r_py = _time(lambda: _fallback.knn_predict(train, labels, test,
                                                     k, 2), repeats)
    tc = np.ascontiguousarray(train)
    qc = np.ascontiguousarray(test)
    t_c, r_c = _time(lambda: _core.knn_predict(tc, labels, qc, k, 2),
                     repeats)
    assert np.array_equal(r_py, r_c), "backend results diverged"
    return t_py, t_c


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    rows = []
    for m, n in [(60, 500), (100, 2000), (200, 5000)]:
        t_py, t_c = bench_best_split(rng, m, n, args.repeats)
        rows.append((f"best_split {m}x{n}", t_py, t_c))
    for m, n, q, k in [(50, 20, 50, 5), (200, 50, 200, 5)]:
        t_py, t_c = bench_knn(rng, m, n, q, k, args.repeats)
        rows.append((f"knn {m}x{n} q={q} k={k}", t_py, t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel case'.ljust(width)}  python(ms)  compiled(ms)  speedup")
    for name, t_py, t_c in rows:
        print(f"{name.ljust(width)}  {1e3 * t_py:10.3f}  {1e3 * t_c:12.3f}"
              f"  {t_py / t_c:6.2f}x")


if __name__ == "__main__":
    main()
