"""Command line interface: probe | solve | fit | asymptotics | verify.

Artifacts of a run (all plain text, fixed 12-significant-digit formatting so
repeated runs diff byte-identically):

    field.dat      x y psi rho u v mach, one row per in-domain node
    boundary.dat   free-boundary polyline, columns y x
    report.json    machine-readable diagnostics report

Exit codes: 0 success (all mandatory invariants PASS), 2 configuration error,
3 solver failure (diagnostics still written when possible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import asymptotics, energy, errors, flow_state, freeboundary, geometry, solver
from .config import load_config
from .kernels import backend_name

__all__ = ["main"]

_MANDATORY = ("bounds", "x_monotonicity", "radial_velocity_sign",
              "comparison_bracket", "graph_property", "mass_flux_slices")


def _fmt(x):
    return "%.12g" % x


def write_field_table(path, sol):
    grid = sol.grid
    lines = ["# x y psi rho u v mach"]
    for i in range(grid.n_i):
        for j in range(grid.n_j):
            if not grid.inside[i, j]:
                continue
            lines.append(" ".join(_fmt(v) for v in (
                grid.x[i], grid.y[j], sol.psi[i, j], sol.rho[i, j],
                sol.u[i, j], sol.v[i, j], sol.mach[i, j])))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_boundary(path, fb):
    lines = ["# y x"]
    if fb is not None:
        for yv, xv in zip(fb.y, fb.x):
            lines.append("%s %s" % (_fmt(yv), _fmt(xv)))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _verdict(ok):
    return "PASS" if ok else "FAIL"


def build_report(run_cfg, sol, fb=None, fit_result=None, timing=None):
    """Diagnostics report: every module invariant appears exactly once."""
    grid, gas = sol.grid, sol.gas
    inv = sol.diagnostics.get("invariants") or solver.check_invariants(sol)
    sub = solver.verify_subsonic(sol)
    bern = solver.bernoulli_check(sol)

    report = {
        "backend": backend_name(),
        "lambda": sol.Lambda,
        "lambda_eps": sol.lam_eps,
        "delta_final": sol.delta_final,
        "convergence": {
            "energy": sol.energy, "residual": sol.residual,
            "iterations": sol.iterations, "converged": bool(sol.converged),
            "trace": [[int(s), int(i), float(e), float(r)] for (s, i, e, r) in sol.trace],
        },
        "invariants": {},
        "subsonic": sub,
        "bernoulli_check": bern,
    }
    iv = report["invariants"]
    iv["bounds"] = {**inv["bounds"], "verdict": _verdict(inv["bounds"]["pass"])}
    iv["x_monotonicity"] = {**inv["x_monotonicity"],
                            "verdict": _verdict(inv["x_monotonicity"]["pass"])}
    iv["strict_interior_monotonicity"] = {
        **inv["strict_interior_monotonicity"],
        "verdict": _verdict(inv["strict_interior_monotonicity"]["pass"])}
    iv["radial_velocity_sign"] = {**inv["radial_velocity_sign"],
                                  "verdict": _verdict(inv["radial_velocity_sign"]["pass"])}
    iv["comparison_bracket"] = {**inv["comparison_bracket"],
                                "verdict": _verdict(inv["comparison_bracket"]["pass"])}
    iv["subsonic_bound"] = {"max_ratio": sub["max_ratio"], "max_mach": sub["max_mach"],
                            "verdict": _verdict(sub["pass"])}
    iv["mass_flux_slices"] = {
        "max_rel_err": bern["max_mass_slice_rel_err"],
        "verdict": _verdict(bern["max_mass_slice_rel_err"] <= 1e-6)}

    if fb is not None:
        report["free_boundary"] = {
            "upsilon1": fb.upsilon1, "dupsilon1": fb.dupsilon1,
            "upsilon1_quad": fb.upsilon1_quad, "H_lower": fb.H_lower,
            "level": fb.level, "n_samples": int(fb.y.size),
            "multi_rows": int(fb.multi_rows),
        }
        iv["graph_property"] = {"multi_rows": int(fb.multi_rows),
                                "verdict": _verdict(fb.multi_rows <= max(3, fb.y.size // 10))}
        try:
            report["fb_condition"] = freeboundary.fb_condition_residual(sol, fb)
        except errors.JetfbError as exc:
            report["fb_condition"] = {"error": str(exc)}
    else:
        report["free_boundary"] = None
        iv["graph_property"] = {"verdict": "SKIPPED", "reason": "no free boundary"}
        report["fb_condition"] = None

    if fit_result is not None:
        report["fit"] = {
            "Lambda_star": fit_result.Lambda,
            "ambiguous": bool(fit_result.ambiguous),
            "bracket": list(fit_result.bracket),
            "smooth_fit_residual": fit_result.smooth_fit_residual,
            "history": fit_result.history,
        }
        jumps = _fit_continuity_jumps(fit_result.history, grid.hy)
        iv["continuous_dependence"] = {
            "max_jump_per_percent_lambda": jumps,
            "verdict": _verdict(np.isfinite(jumps) and jumps <= 10.0 * grid.hy)
            if np.isfinite(jumps) else "SKIPPED"}
        iv["smooth_fit"] = {
            "residual": fit_result.smooth_fit_residual,
            "verdict": "REPORTED"}
    else:
        report["fit"] = None
        iv["continuous_dependence"] = {"verdict": "SKIPPED", "reason": "no fit run"}
        iv["smooth_fit"] = {"verdict": "SKIPPED", "reason": "no fit run"}

    # far-field cross-oracle (downstream state may be sonic-infeasible)
    try:
        ds = asymptotics.downstream_state(gas, sol.Lambda)
        ff = asymptotics.farfield_compare(sol, ds)
        report["farfield"] = ff
        iv["theta_map"] = {
            "contracts": ds.contracts,
            "mass_balance_rel_err": ds.mass_balance_rel_err,
            "verdict": _verdict(ds.mass_balance_rel_err <= 1e-8
                                and bool(np.all(np.diff(ds.theta) > 0.0)))}
        u_th = np.asarray(ds.u_at_theta)
        bcons = np.abs(0.5 * u_th ** 2 + flow_state.enthalpy(ds.rho_d, gas.constants.gamma)
                       - np.asarray(gas.bernoulli.value(ds._psibar_vals)))
        iv["bernoulli_consistency_downstream"] = {
            "max_abs": float(np.max(bcons)),
            "verdict": _verdict(float(np.max(bcons)) <= 1e-8 * max(1.0, gas.constants.B_upper))}
        iv["u_d0_positive"] = {
            "u_d0": float(u_th[0]), "rho_d": ds.rho_d, "rho_bar": gas.bernoulli.rho_bar,
            "verdict": _verdict(u_th[0] > 0.0 or ds.rho_d >= gas.bernoulli.rho_bar)}
    except errors.JetfbError as exc:
        report["farfield"] = {"error": str(exc),
                              "upstream_sup_rel": asymptotics.farfield_compare(sol, None)["upstream_sup_rel"]}
        for name in ("theta_map", "bernoulli_consistency_downstream", "u_d0_positive"):
            iv[name] = {"verdict": "SKIPPED", "reason": str(exc)}

    report["timing"] = timing or {}
    return report


def _fit_continuity_jumps(history, hy):
    best = 0.0
    found = False
    for a, b in zip(history[:-1], history[1:]):
        la, lb = a["Lambda"], b["Lambda"]
        ua, ub = a["upsilon1"], b["upsilon1"]
        if not (np.isfinite(ua) and np.isfinite(ub)):
            continue
        dl = abs(lb - la) / max(abs(la), 1e-300)
        if 0.0 < dl <= 0.02:
            found = True
            best = max(best, abs(ub - ua) * 0.01 / dl)
    return best if found else np.inf


def _report_ok(report):
    for name in _MANDATORY:
        v = report["invariants"].get(name)
        if v is not None and v.get("verdict") == "FAIL":
            return False
    return True


def _dump_report(report, path):
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))
    with open(path, "w") as f:
        json.dump(report, f, indent=1, default=default, allow_nan=True)
        f.write("\n")


def _run_and_write(run_cfg, do_fit, Lambda=None, progress=None):
    t0 = time.time()
    gas = run_cfg.make_gas()
    grid = run_cfg.make_grid()
    scfg = run_cfg.solver_config(progress=progress)
    _tune_inlet_layer(run_cfg, gas, grid)
    fit_result = None
    if do_fit:
        fit_result = freeboundary.fit_lambda(
            grid, gas, cfg=scfg, bracket=run_cfg.bracket, tol=run_cfg.fit_tol,
            lambda_tol=run_cfg.lambda_tol, prefit=run_cfg.prefit,
            eval_tol_factor=run_cfg.eval_tol_factor, progress=progress)
        sol, fb = fit_result.solution, fit_result.boundary
    else:
        geometry.boundary_data(grid, run_cfg.Q, Lambda)
        sol = solver.solve_fixed_lambda(grid, gas, Lambda, cfg=scfg)
        try:
            fb = freeboundary.extract_boundary(sol)
        except errors.NoFreeBoundaryError:
            fb = None
    timing = {"wall_seconds": time.time() - t0}
    report = build_report(run_cfg, sol, fb=fb, fit_result=fit_result, timing=timing)
    report["config_echo"] = run_cfg.raw
    report["workers"] = run_cfg.workers
    out = run_cfg.out_dir
    os.makedirs(out, exist_ok=True)
    write_field_table(os.path.join(out, "field.dat"), sol)
    write_boundary(os.path.join(out, "boundary.dat"), fb)
    _dump_report(report, os.path.join(out, "report.json"))
    return report


def _tune_inlet_layer(run_cfg, gas, grid):
    """Halve k_mu until the inlet profile is a discrete subsolution."""
    if grid.is_rectangle or run_cfg.k_mu is not None:
        return grid
    while True:
        margin = energy.inlet_subsolution_margin(gas, grid)
        if margin >= -1e-9 * grid.Q or grid.k_mu / 2.0 < 4.0 * grid.hy:
            return grid
        new = geometry.build_domain(grid.nozzle, grid.mu, grid.R, grid.hy,
                                    s_exp=grid.s_exp, k_mu=grid.k_mu / 2.0, Q=grid.Q)
        grid.__dict__.update(new.__dict__)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="jetfb",
                                     description="Axisymmetric compressible jet solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_probe = sub.add_parser("probe", help="print flow-state evaluators at (t, z)")
    p_probe.add_argument("--config", required=True)
    p_probe.add_argument("--t", type=float, required=True)
    p_probe.add_argument("--z", type=float, required=True)

    p_solve = sub.add_parser("solve", help="solve at fixed free-boundary momentum")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--Lambda", type=float, required=True)
    p_solve.add_argument("--quiet", action="store_true")

    p_fit = sub.add_parser("fit", help="shoot on Lambda for continuous fit")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--quiet", action="store_true")

    p_asy = sub.add_parser("asymptotics", help="downstream-state table over a Lambda sweep")
    p_asy.add_argument("--config", required=True)
    p_asy.add_argument("--lambdas", type=str, default="",
                       help="comma-separated momenta (default: subsonic sweep)")

    p_ver = sub.add_parser("verify", help="re-check invariants of a written solution")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--solution", required=True, help="output directory of a run")

    args = parser.parse_args(argv)
    try:
        run_cfg = load_config(args.config)
    except errors.ConfigError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return 2

    if args.command == "probe":
        gas = run_cfg.make_gas()
        t, z = args.t, args.z
        g, dtg, dzg = gas.tables.g_eps(t, z)
        B, dB, d2B = gas.bernoulli(z)
        G, dzG, Phi = gas.tables.energy_density(t, z)
        print("B(z)      = %s" % _fmt(float(B)))
        print("B'(z)     = %s" % _fmt(float(dB)))
        print("tc(B(z))  = %s" % _fmt(float(gas.tables.sonic_momentum(z))))
        try:
            ge, dtge, dzge = gas.tables.g(t, z)
            print("g         = %s" % _fmt(float(ge)))
            print("dt_g      = %s" % _fmt(float(dtge)))
            print("dz_g      = %s" % _fmt(float(dzge)))
        except errors.SonicStateError:
            print("g         = (sonic-or-supersonic: exact branch undefined)")
        print("g_eps     = %s" % _fmt(float(g)))
        print("dt_g_eps  = %s" % _fmt(float(dtg)))
        print("dz_g_eps  = %s" % _fmt(float(dzg)))
        print("G_eps     = %s" % _fmt(float(G)))
        print("dz_G_eps  = %s" % _fmt(float(dzG)))
        print("Phi_eps   = %s" % _fmt(float(Phi)))
        return 0

    if args.command == "asymptotics":
        gas = run_cfg.make_gas()
        if args.lambdas:
            lams = [float(v) for v in args.lambdas.split(",")]
        else:
            tc = float(gas.tables.sonic_momentum(run_cfg.Q))
            lams = list(np.sqrt(tc) * np.linspace(0.3, 0.97, 10))
        print("# Lambda rho_d H_d p_d u_d(0)")
        for lam in lams:
            try:
                st = asymptotics.downstream_state(gas, lam)
                print(" ".join(_fmt(v) for v in
                               (lam, st.rho_d, st.H_d, st.p_d, st.u_at_theta[0])))
            except errors.JetfbError as exc:
                print("%s ERROR %s" % (_fmt(lam), exc))
        return 0

    if args.command == "verify":
        return _verify(run_cfg, args.solution)

    progress = None if getattr(args, "quiet", False) else (
        lambda s: sys.stderr.write(s + "\n"))
    try:
        if args.command == "solve":
            report = _run_and_write(run_cfg, do_fit=False, Lambda=args.Lambda,
                                    progress=progress)
        else:
            report = _run_and_write(run_cfg, do_fit=True, progress=progress)
    except errors.ConfigError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return 2
    except errors.JetfbError as exc:
        sys.stderr.write("solver failure: %s\n" % exc)
        return 3
    return 0 if _report_ok(report) else 3


def _verify(run_cfg, sol_dir):
    field_path = os.path.join(sol_dir, "field.dat")
    if not os.path.exists(field_path):
        sys.stderr.write("no field table at %s\n" % field_path)
        return 2
    data = np.loadtxt(field_path)
    gas = run_cfg.make_gas()
    grid = run_cfg.make_grid()
    rep_path = os.path.join(sol_dir, "report.json")
    Lambda = run_cfg.Q
    if os.path.exists(rep_path):
        with open(rep_path) as f:
            Lambda = json.load(f).get("lambda", Lambda)
    geometry.boundary_data(grid, run_cfg.Q, Lambda)
    psi = grid.psi_sharp[:grid.n_lattice].reshape(grid.n_i, grid.n_j).copy()
    ii = np.clip(np.round((data[:, 0] - grid.x[0]) / grid.hx).astype(int), 0, grid.n_i - 1)
    jj = np.clip(np.round(data[:, 1] / grid.hy - 0.5).astype(int), 0, grid.n_j - 1)
    psi[ii, jj] = data[:, 2]
    rho, u, v, mach = solver.derived_fields(grid, gas, psi)
    lam_eps = gas.tables.lambda_eps_truncated(Lambda)
    sol = solver.JetSolution(
        grid=grid, gas=gas, psi=psi, Lambda=float(Lambda), lam_eps=lam_eps,
        delta_final=energy.default_delta(grid, lam_eps) * 0.25,
        rho=rho, u=u, v=v, mach=mach, energy=np.nan, residual=np.nan,
        iterations=0, converged=True)
    try:
        fb = freeboundary.extract_boundary(sol)
    except errors.NoFreeBoundaryError:
        fb = None
    report = build_report(run_cfg, sol, fb=fb)
    for name, v in sorted(report["invariants"].items()):
        print("%-34s %s" % (name, v.get("verdict")))
    ok = _report_ok(report)
    print("overall: %s" % ("PASS" if ok else "FAIL"))
    return 0 if ok else 3


if __name__ == "__main__":
    sys.exit(main())
