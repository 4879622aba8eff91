#!/usr/bin/env python3
"""Time each hot kernel under numba and pure numpy, plus one end-to-end solve.

Usage:
    python3 benchmarks/bench_kernels.py [--repeat R] [--points M]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from optmeas import kernels
from optmeas.poly_basis import PointSet, graded_basis, interval_grid, polar_grid, vandermonde


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile / cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(points: int):
    rng = np.random.default_rng(0)
    b = graded_basis(2, 10)
    pts = polar_grid(int(np.sqrt(points)), int(np.sqrt(points)) * 2).points
    grid = interval_grid(-1, 1, points)
    v1 = vandermonde(graded_basis(1, 16), grid)
    c1 = np.triu(rng.normal(size=(17, 17))).astype(np.complex128)
    logs = np.zeros(points)
    vsmall = vandermonde(graded_basis(1, 4), interval_grid(-1, 1, 25))
    vleja = vandermonde(b, PointSet(rng.uniform(-1, 1, (points, 2))))
    return {
        "monomial_matrix": (lambda f: f(pts, b.exponents, b.n), kernels.monomial_matrix_nb,
                            kernels.monomial_matrix_np),
        "christoffel_sweep": (lambda f: f(v1, c1, logs, True), kernels.christoffel_sweep_nb,
                              kernels.christoffel_sweep_np),
        "best_subset C(25,5)": (lambda f: f(vsmall, np.zeros(25), 1e-12), kernels.best_subset_nb,
                                kernels.best_subset_np),
        "leja_eliminate": (lambda f: f(vleja, 0, b.N), kernels.leja_eliminate_nb,
                           kernels.leja_eliminate_np),
        "lagrange_sums": (lambda f: f(v1, c1), kernels.lagrange_sums_nb, kernels.lagrange_sums_np),
    }


def end_to_end(flag: str) -> float:
    code = ("import time; from optmeas.design_solver import solve_optimal;"
            "from optmeas.measures import constant_weight; from optmeas.poly_basis import *;"
            "g=interval_grid(-1,1,2001); w=constant_weight(g);"
            "solve_optimal(g,w,graded_basis(1,2));"
            "t=time.perf_counter(); [solve_optimal(g,w,graded_basis(1,n)) for n in range(1,13)];"
            "print(time.perf_counter()-t)")
    env = dict(os.environ, OPTMEAS_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=4000)
    ap.add_argument("--skip-solve", action="store_true", help="skip the end-to-end solver timing")
    args = ap.parse_args(argv)

    if not kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, (call, nb, np_) in cases(args.points).items():
        t_nb = best_of(lambda: call(nb), args.repeat)
        t_np = best_of(lambda: call(np_), args.repeat)
        print(f"{name:<22}{t_nb * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_nb:>10.1f}")
    if not args.skip_solve:
        t_nb, t_np = end_to_end("1"), end_to_end("0")
        print(f"{'solve n=1..12, M=2001':<22}{t_nb * 1e3:>12.1f}{t_np * 1e3:>12.1f}{t_np / t_nb:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
