"""Time the compiled kernels against their numpy fallbacks.

Run from a checkout with the package installed:

    python3 benchmarks/bench_kernels.py [--repeats 20]

Both routes are fed identical inputs and their outputs are compared
bit-for-bit before timing; a mismatch aborts the run.
"""

import argparse
import time

import numpy as np

from geomimu import _kernels
from geomimu._kernels import fallback


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_nearest_codes(rng, repeats):
    x = rng.normal(size=(4096, 16))
    codebook = rng.normal(size=(512, 16))
    return "nearest_codes 4096x16 vs 512", (x, codebook), _kernels.nearest_codes, fallback.nearest_codes, (x, codebook)


def bench_lbs_transform(rng, repeats):
    V, m, F, J = 6890, 4, 120, 24
    rest = rng.normal(size=(V, 3))
    weights = rng.random(size=(V, m))
    weights /= weights.sum(axis=1, keepdims=True)
    joint_idx = rng.integers(0, J, size=(V, m))
    A = rng.normal(size=(F, J, 3, 3))
    b = rng.normal(size=(F, J, 3))
    args = (rest, weights, joint_idx, A, b)
    return "lbs_transform 120fx6890v", args, _kernels.lbs_transform, fallback.lbs_transform, args


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ns = ap.parse_args()

    if not _kernels.HAVE_EXT:
        print("compiled extension not available (or GEOMIMU_PURE set); nothing to compare")
        return

    rng = np.random.default_rng(0)
    rows = []
    for bench in (bench_nearest_codes, bench_lbs_transform):
        name, args, fast, slow, _ = bench(rng, ns.repeats)
        got, ref = fast(*args), slow(*args)
        if np.asarray(got).tobytes() != np.asarray(ref).tobytes():
            raise SystemExit(f"{name}: compiled and fallback outputs differ")
        t_fast = _time(fast, args, ns.repeats)
        t_slow = _time(slow, args, ns.repeats)
        rows.append((name, t_fast, t_slow))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  compiled    numpy       speedup")
    for name, t_fast, t_slow in rows:
        print(f"{name:<{width}}  {t_fast * 1e3:8.3f}ms  {t_slow * 1e3:8.3f}ms  {t_slow / t_fast:6.2f}x")


if __name__ == "__main__":
    main()
