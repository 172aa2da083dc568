"""Compare the compiled and pure-numpy kernel backends.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --draws 200000 --repeats 7

The first timed call on the compiled backend includes JIT compilation,
so each case is warmed up once before measurement. Numbers are wall
time; the point is the ratio, not the absolute values.
"""

import argparse
import statistics
import time

import numpy as np

from ist import _kernels
from ist._kernels import active_backend, entropy_bits, match_counts, set_backend


def time_call(fn, repeats):
    fn()  # warmup (and JIT compile on the numba path)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_entropy(size, repeats):
    rng = np.random.default_rng(1)
    p = rng.random(size)
    p /= p.sum()
    return time_call(lambda: entropy_bits(p), repeats)


def bench_match_counts(n_dims, k, draws, repeats):
    rng = np.random.default_rng(2)
    cdfs = np.ones((n_dims, k))
    for row in range(n_dims):
        raw = rng.random(k) + 0.05
        cdf = np.cumsum(raw / raw.sum())
        cdf[-1] = 1.0
        cdfs[row] = cdf
    dim_ixs = np.arange(n_dims, dtype=np.int64)
    user_ixs = rng.integers(0, k, size=n_dims).astype(np.int64)
    ks = np.full(n_dims, k, dtype=np.int64)
    return time_call(
        lambda: match_counts(12345, 0, dim_ixs, user_ixs, cdfs, ks, draws),
        repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--entropy-size", type=int, default=1_000_000)
    ap.add_argument("--dims", type=int, default=8)
    ap.add_argument("--alphabet", type=int, default=64)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    backends = ["numpy"]
    if _kernels.njit is not None:
        backends.append("numba")
    else:
        print("numba not importable; timing the numpy backend only\n")

    rows = []
    for name in backends:
        set_backend(name)
        assert active_backend() == name
        e = bench_entropy(args.entropy_size, args.repeats)
        m = bench_match_counts(args.dims, args.alphabet, args.draws,
                               args.repeats)
        rows.append((name, e, m))
    set_backend(None)

    print(f"{'backend':<8} {'entropy_bits':>14} {'match_counts':>14}")
    print(f"{'':<8} {f'({args.entropy_size:,} cells)':>14} "
          f"{f'({args.draws:,} draws)':>14}")
    for name, e, m in rows:
        print(f"{name:<8} {e * 1e3:>12.3f}ms {m * 1e3:>12.3f}ms")
    if len(rows) == 2:
        print(f"{'speedup':<8} {rows[0][1] / rows[1][1]:>13.1f}x "
              f"{rows[0][2] / rows[1][2]:>13.1f}x")


if __name__ == "__main__":
    main()
