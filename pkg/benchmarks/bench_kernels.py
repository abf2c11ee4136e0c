"""Time each hot kernel under numba and under the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache) and is reported
separately from the steady-state timing.
"""

import argparse
import time

import numpy as np

from parce import _kernels
from parce.segmentation import sorted_edges


def cases():
    rng = np.random.default_rng(0)
    xs, ys = rng.uniform(-50, 50, 64 * 64 * 20), rng.uniform(-50, 50, 64 * 64 * 20)
    img = rng.random((64, 64, 3))
    src, dst, w = sorted_edges(img, 0.8)
    roots = _kernels.numpy_impl["fh_merge"](64 * 64, src, dst, w, 100.0, 20)
    s0 = rng.normal(size=(128, 5))
    u = rng.uniform(-0.5, 0.5, (128, 60, 2))
    return {
        "value_noise": (xs, ys, 7, 0.5, 3, 0.5),
        "fh_merge": (64 * 64, src, dst, w, 100.0, 20),
        "relabel": (roots,),
        "rollout": (s0, u, 0.1, 0.26, 0.35),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<12} {'first numba':>12} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, a in cases().items():
        nb, npf = _kernels.numba_impl[name], _kernels.numpy_impl[name]
        t0 = time.perf_counter()
        nb(*a)
        first = time.perf_counter() - t0
        t_nb = best_of(nb, a, args.repeat)
        t_np = best_of(npf, a, args.repeat)
        print(f"{name:<12} {first * 1e3:10.2f}ms {t_nb * 1e3:8.2f}ms {t_np * 1e3:8.2f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
