#!/usr/bin/env python3
"""Times the numba and numpy kernel backends on training-shaped inputs.

Run:  python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from hazelift.nn import kernels_numpy

try:
    from hazelift.nn import kernels_numba

    HAVE_NUMBA = True
except ImportError:
    kernels_numba = None
    HAVE_NUMBA = False

# (label, n, ci, co, h, w, k, stride, pad) for the default topology at
# batch 32; the two stride patterns dominate a training step
SHAPES = [
    ("trunk 3x3 s1 full-res", 32, 8, 8, 64, 64, 3, 1, 1),
    ("trunk 4x4 s2 downsample", 32, 8, 16, 64, 64, 4, 2, 1),
    ("trunk 3x3 s1 mid-res", 32, 16, 32, 32, 32, 3, 1, 1),
    ("branch 4x4 s2 bottleneck", 32, 32, 32, 16, 16, 4, 2, 1),
]


def timeit(fn, repeats):
    fn()  # warm up (and JIT-compile on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def bench_case(mod, n, ci, co, h, w, k, stride, pad, repeats, rng):
    x = rng.standard_normal((n, ci, h, w)).astype(np.float32)
    wt = rng.standard_normal((co, ci, k, k)).astype(np.float32)
    y = mod.corr_fwd(x, wt, stride, pad)
    gy = rng.standard_normal(y.shape).astype(np.float32)
    return {
        "fwd": timeit(lambda: mod.corr_fwd(x, wt, stride, pad), repeats),
        "bwd_in": timeit(
            lambda: mod.corr_bwd_input(gy, wt, stride, pad, h, w), repeats
        ),
        "bwd_w": timeit(
            lambda: mod.corr_bwd_weight(x, gy, stride, pad, k, k), repeats
        ),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"numba available: {HAVE_NUMBA}")
    header = f"{'case':<28}{'op':<8}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, *dims in SHAPES:
        np_times = bench_case(kernels_numpy, *dims, args.repeats, rng)
        nb_times = (
            bench_case(kernels_numba, *dims, args.repeats, rng) if HAVE_NUMBA else None
        )
        for op in ("fwd", "bwd_in", "bwd_w"):
            if nb_times:
                ratio = np_times[op] / nb_times[op]
                print(
                    f"{label:<28}{op:<8}{np_times[op]:>10.2f}{nb_times[op]:>10.2f}"
                    f"{ratio:>8.2f}x"
                )
            else:
                print(f"{label:<28}{op:<8}{np_times[op]:>10.2f}{'-':>10}{'-':>9}")
            label = ""
    print(
        "\nnote: HAZELIFT_BACKEND=numpy|numba|auto selects the backend at import time"
    )


if __name__ == "__main__":
    main()
