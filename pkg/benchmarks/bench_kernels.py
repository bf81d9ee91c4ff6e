"""Compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints the best-of-N wall time of each kernel for both implementations, the
speedup, and the largest absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from manifold_brownian import _kernels_py as fallback
from manifold_brownian import kernels


def cases(n_paths):
    ids = np.arange(n_paths, dtype=np.int64)
    eye = np.tile(np.eye(3).reshape(9), (n_paths, 1))
    omega = np.random.default_rng(0).normal(size=(n_paths, 3)) * 0.05
    noisy = eye + 1e-3 * np.random.default_rng(1).normal(size=eye.shape)
    return {
        "normals (N x 3)": lambda k: k.normals(7, ids, 3, 0, 3),
        "so3_right_exp": lambda k: k.so3_right_exp(eye, omega),
        "so3_exp_walk (50 steps)": lambda k: k.so3_exp_walk(np.array(eye), 7, ids, 0, 50, 1e-3, np.zeros(3)),
        "so3_polar": lambda k: k.so3_polar(noisy),
        "so3_residual": lambda k: k.so3_residual(noisy),
        "torus chain (2e5 steps)": lambda k: k.torus_chain_histogram(2.0, 1.0, 1e-2, 200_000, 0, 3, 36),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.compiled is None:
        print("compiled extension not available; nothing to compare")
        return
    print(f"{'kernel':<26} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |diff|':>11}")
    for name, fn in cases(args.paths).items():
        t_py = min(timeit.repeat(lambda: fn(fallback), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(kernels.compiled), number=1, repeat=args.repeat))
        a, b = np.asarray(fn(fallback), dtype=float), np.asarray(fn(kernels.compiled), dtype=float)
        print(f"{name:<26} {t_py:>11.4f} {t_c:>13.4f} {t_py / t_c:>7.1f}x {np.max(np.abs(a - b)):>11.2e}")


if __name__ == "__main__":
    main()
