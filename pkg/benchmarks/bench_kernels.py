#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Runs the three evaluation workloads (membership programs, grid
interpolation, Monte Carlo product reduction) and one end-to-end operator
grid on both backends and prints a timing table.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import os
import time

import numpy as np

from simplexavg import _kernels
from simplexavg._kernels import _ref, FieldSpec, HAVE_CORE
from simplexavg.geometry import regular_simplex_vertices
from simplexavg.gridfn import rasterize
from simplexavg.shapes import ShapeSet


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(quick: bool):
    rng = np.random.default_rng(0)
    n_pts = 200_000 if not quick else 20_000
    cap = ShapeSet.intersection_of(
        [ShapeSet.annulus([0.0, 0.0], 0.9, 1.1), ShapeSet.slab(1, [1.0, 0.0], 0.2, 3.0)]
    )
    f_shape = FieldSpec.from_shape(cap)
    grid = rasterize(ShapeSet.ball([0.0, 0.0], 1.0), box=([-2.0, -2.0], [2.0, 2.0]), h=1 / 64)
    f_grid = FieldSpec.from_gridfunction(
        type(grid)(grid.lo, grid.h, rng.random(grid.values.shape))
    )
    pts = rng.uniform(-1.5, 1.5, size=(n_pts, 2))

    c, n = (256, 1024) if quick else (1024, 4096)
    x = rng.uniform(-1, 1, size=(c, 2))
    offsets = rng.uniform(-1, 1, size=(c, n, 2, 2))

    rows = []
    backends = [("python", _ref)]
    if HAVE_CORE:
        backends.append(("cython", _kernels._core))
    for name, mod in backends:
        t_shape = timeit(lambda: mod.eval_points(f_shape, pts))
        t_grid = timeit(lambda: mod.eval_points(f_grid, pts))
        t_red = timeit(lambda: mod.product_reduce([f_shape, f_grid], x, offsets, 4), repeat=2)
        rows.append((name, t_shape, t_grid, t_red))
    return rows, n_pts, c * n


def bench_operator(quick: bool):
    from simplexavg.operators import simplex_average

    tri = regular_simplex_vertices(2, 2)
    E = rasterize(ShapeSet.annulus([0.0, 0.0], 0.85, 1.15), h=1 / 32, align="cell")
    n = 512 if quick else 2048
    out = {}
    for name in (["python", "cython"] if HAVE_CORE else ["python"]):
        os.environ["SIMPLEXAVG_KERNEL"] = name
        t0 = time.perf_counter()
        res = simplex_average(tri, [E, E], n_samples=n, seed=0, workers=1)
        out[name] = (time.perf_counter() - t0, float(res.values.sum()))
    os.environ.pop("SIMPLEXAVG_KERNEL", None)
    return out, n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()

    print(f"compiled core available: {HAVE_CORE}")
    rows, n_pts, n_red = bench_kernels(args.quick)
    print(f"\nkernel microbenchmarks ({n_pts} membership/interp points, "
          f"{n_red} product-reduce evaluations):")
    print(f"{'backend':<8} {'membership':>12} {'interp':>12} {'reduce':>12}")
    base = None
    for name, ts, tg, tr in rows:
        print(f"{name:<8} {ts * 1e3:>10.1f}ms {tg * 1e3:>10.1f}ms {tr * 1e3:>10.1f}ms")
        if base is None:
            base = (ts, tg, tr)
        else:
            print(f"{'speedup':<8} {base[0] / ts:>11.1f}x {base[1] / tg:>11.1f}x {base[2] / tr:>11.1f}x")

    op_times, n = bench_operator(args.quick)
    print(f"\nend-to-end triangle average on an annulus pair ({n} rotations/point):")
    for name, (t, total) in op_times.items():
        print(f"{name:<8} {t:>10.2f}s  (checksum {total:.3f})")
    if len(op_times) == 2:
        print(f"speedup  {op_times['python'][0] / op_times['cython'][0]:>10.1f}x")


if __name__ == "__main__":
    main()
