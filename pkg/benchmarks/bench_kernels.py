#!/usr/bin/env python3
"""Benchmark the hot cell kernels: compiled core vs pure-numpy fallback.

Times the fused energy/gradient(/diagonal) pass on the canonical grid.  Run
after `pip install -e .`; the compiled backend is skipped if it did not build.

    python benchmarks/bench_kernels.py [--h 0.015625] [--repeat 20]
"""

import argparse
import time

import numpy as np

from jetfb import flow_state as fs, geometry as geo
from jetfb.kernels import HAVE_COMPILED, numpy_backend
from jetfb.kernels.tables import build_tables


def make_workload(h):
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    gas = fs.make_gas_model(prof, 4.0, 2.0, 0.1)
    noz = geo.NozzleGeometry.log(2.0)
    grid = geo.build_domain(noz, mu=4.0, R=8.0, h=h, Q=4.0)
    geo.boundary_data(grid, 4.0, Lambda=8.5)
    lat = grid.psi_sharp[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    w = (grid.x - grid.x[0]) / (grid.x[-1] - grid.x[0])
    psi = (1 - w)[:, None] * lat[0][None, :] + w[:, None] * lat[-1][None, :]
    psi = np.where(grid.node_class == geo.DIRICHLET, lat, psi)
    tab = build_tables(gas)
    v = grid.full_values(psi)
    lam2 = gas.tables.lambda_eps_truncated(8.5) ** 2
    delta = 0.02
    return gas, grid, tab, v, lam2, delta


def bench(fn, repeat):
    fn()  # warmup
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=1.0 / 64.0)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    gas, grid, tab, v, lam2, delta = make_workload(args.h)
    wx = 1.0 / (2.0 * grid.hx)
    common = (v, grid.cells, grid.cell_y, wx, grid.cell_wy, grid.cell_area,
              grid.cell_weight)
    print("grid: %d x %d nodes, %d cells" % (grid.n_i, grid.n_j, grid.cells.shape[0]))

    rows = []
    for want_diag in (False, True):
        t_np = bench(lambda: numpy_backend.energy_gradient(
            *common, tab, lam2, delta, want_diag=want_diag), args.repeat)
        rows.append(("numpy", want_diag, t_np))
        if HAVE_COMPILED:
            from jetfb.kernels import _core
            t_cy = bench(lambda: _core.energy_gradient(
                *common, tab.gamma, tab.epsilon, tab.g_upper, tab.cg, tab.Q,
                tab.z0, tab.dz, *tab.as_arrays(), lam2, delta,
                1 if want_diag else 0), args.repeat)
            rows.append(("compiled", want_diag, t_cy))

    print("%-10s %-10s %12s %10s" % ("backend", "diag", "best [ms]", "speedup"))
    base = {}
    for name, diag, t in rows:
        base.setdefault(diag, t)
        print("%-10s %-10s %12.2f %10s" % (
            name, diag, 1e3 * t,
            "%.1fx" % (base[diag] / t) if name == "compiled" else "-"))
    if not HAVE_COMPILED:
        print("(compiled core not available; numpy fallback only)")


if __name__ == "__main__":
    main()
