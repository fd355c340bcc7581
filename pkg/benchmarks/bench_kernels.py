"""Compare the numba and numpy overlap kernels on synthetic membership masks.

    python benchmarks/bench_kernels.py [--sizes 10000 100000 1000000] [--k 6] [--repeat 5]

Prints the best-of-N wall time per kernel and backend. Results are checked
for equality before timing so a speedup never hides a wrong answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from oaimeta import _kernels


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def masks_for(n: int, k: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(1, 1 << k, size=n, dtype=np.int64)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
    np_k, nb_k = _kernels.NUMPY, _kernels.NUMBA
    bit = args.k // 2

    # compile once outside the timed region
    warm = masks_for(8, args.k)
    nb_k.region_counts(warm), nb_k.pair_counts(warm, args.k), nb_k.popcount(warm), nb_k.drop_bit(warm, bit)

    print(f"{'kernel':<14}{'n':>10}{'numpy ms':>12}{nb_k.name + ' ms':>12}{'speedup':>10}")
    for n in args.sizes:
        m = masks_for(n, args.k)
        cases = {
            "region_counts": (lambda kern: kern.region_counts(m)),
            "pair_counts": (lambda kern: kern.pair_counts(m, args.k)),
            "popcount": (lambda kern: kern.popcount(m)),
            "drop_bit": (lambda kern: kern.drop_bit(m, bit)),
        }
        for name, call in cases.items():
            a, b = call(np_k), call(nb_k)
            same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
            if not same:
                raise SystemExit(f"{name}: backends disagree at n={n}")
            t_np = best_of(lambda: call(np_k), args.repeat)
            t_nb = best_of(lambda: call(nb_k), args.repeat)
            print(f"{name:<14}{n:>10}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
