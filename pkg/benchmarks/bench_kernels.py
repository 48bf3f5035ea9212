"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from midas import kernels
from midas._accel import HAVE_NUMBA


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    clips = rng.random((64, 8, 16, 16, 3)).astype(np.float32)
    a, b = clips[0], clips[1]
    preds, truths = rng.integers(0, 7, 10**5), rng.integers(0, 7, 10**5)
    cases = {
        "pool 64x8x16x16x3 -> 8x8": ("pool_clips", (clips, 8, 8)),
        "mix one 8x16x16x3 clip": ("mix_frames", (a, b, 0.3, 0.7)),
        "confusion 1e5 samples": ("confusion_counts", (preds, truths, 7)),
    }
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for label, (name, fargs) in cases.items():
        t_np = best_of(lambda: getattr(kernels, name + "_numpy")(*fargs), args.repeat)
        if HAVE_NUMBA:
            t_nb = best_of(lambda: getattr(kernels, name + "_numba")(*fargs), args.repeat)
            print(f"{label:<28}{t_np * 1e3:>10.3f}{t_nb * 1e3:>10.3f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{label:<28}{t_np * 1e3:>10.3f}{'n/a':>10}")


if __name__ == "__main__":
    main()
