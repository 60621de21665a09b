"""Compare the numba and plain-numpy paths of the hot kernels.

Runs each kernel on a representative workload, reports the median wall
time per call for both implementations, their speedup, and the largest
numerical disagreement.  The first jit call is excluded (compile time).

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from cspar import kernels


def time_call(fn, args, repeat):
    best = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def bench_forward(repeat):
    rng = np.random.default_rng(0)
    el = rng.uniform(0.0, 3.0, (16, 3))
    el[:, 2] = 0.0
    src = rng.uniform(0.5, 2.5, (400, 3))
    src[:, 2] = rng.uniform(5.0, 12.0, 400)
    amp = rng.uniform(0.5, 1.0, 400)
    scalars = (1.5, 20.41, 3.5, 0.1, 1e-3, 0.0)

    def run(fn):
        return fn(np.zeros((16, 1024)), el, src, amp, *scalars)

    return "forward_accumulate (16 el x 400 src x 1024 t)", run


def bench_backproject(repeat):
    rng = np.random.default_rng(1)
    sigs = rng.normal(0.0, 1.0, (96, 256))
    el = rng.uniform(0.0, 24.0, (96, 3))
    el[:, 2] = 0.0
    origin = np.array([0.0, 0.0, 4.0])
    spacing = np.array([1.0, 1.0, 0.5])

    def run(fn):
        vol = np.zeros((4, 24, 21))
        return fn(vol, sigs, el, origin, spacing, 1.5, 20.41)

    return "backproject (96 el -> 4x24x21 voxels)", run


def bench_mvm(repeat):
    rng = np.random.default_rng(2)
    w = rng.choice([-1.0, 0.0, 1.0], (4, 16)) / 16.0
    x = rng.normal(0.0, 1.0, (16, 4096))

    def run(fn):
        return fn(w, x)

    return "mvm (4x16 weights x 4096 samples)", run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba is not importable; only the numpy path can run.")
        print("Install the 'accel' extra or unset CSPAR_DISABLE_NUMBA.")
        return

    pairs = [
        (bench_forward, kernels._forward_numpy, kernels._forward_jit),
        (bench_backproject, kernels._backproject_numpy, kernels._backproject_jit),
        (bench_mvm, kernels._mvm_numpy, kernels._mvm_jit),
    ]
    print(f"{'kernel':<45} {'numpy':>10} {'numba':>10} {'speedup':>8} {'max diff':>10}")
    for maker, fn_np, fn_jit in pairs:
        label, run = maker(args.repeat)
        ref = run(fn_np)
        run(fn_jit)  # compile
        got = run(fn_jit)
        diff = float(np.max(np.abs(np.asarray(ref) - np.asarray(got))))
        t_np = time_call(lambda: run(fn_np), (), args.repeat)
        t_jit = time_call(lambda: run(fn_jit), (), args.repeat)
        print(f"{label:<45} {t_np * 1e3:>8.2f}ms {t_jit * 1e3:>8.2f}ms "
              f"{t_np / t_jit:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
