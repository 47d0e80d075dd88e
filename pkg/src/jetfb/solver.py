"""Minimization of the discrete functional at fixed free-boundary momentum.

Default mode is projected, Jacobi-preconditioned nonlinear conjugate gradient
(Polak-Ribiere with restarts) with Armijo backtracking on the smoothed
functional, run through an outer continuation that halves the indicator
smoothing width; energy decrease across accepted steps is part of the solver
contract.  A four-color nonlinear Gauss-Seidel pde mode cross-validates the
minimizer.  Qualitative properties of the converged field (bounds, axial
monotonicity, sign of the radial velocity, comparison bracket) are asserted;
subsonicity is reported as a diagnostic, never enforced, since the truncated
functional is well defined for choked data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .energy import DiscreteEnergy, default_delta
from .errors import IterationLimitError, QualitativeFailureError
from .flow_state import enthalpy
from .kernels.tables import build_tables

__all__ = ["SolverConfig", "JetSolution", "solve_fixed_lambda",
           "verify_subsonic", "bernoulli_check", "derived_fields"]


@dataclass
class SolverConfig:
    mode: str = "minimize"              # minimize | pde-fixed-point
    max_iter: int = 2000                # NCG iterations per delta stage
    max_outer: int = 60                 # pde-mode outer passes
    max_rounds: int = 40                # GS/Newton polish rounds per stage
    gs_sweeps: int = 12                 # pointwise sweeps per polish round
    tol_energy_rel: float = 1e-10
    tol_residual: float = 1e-8          # residual tol = tol_residual * Q / h^2
    c_delta: float = 1.0
    delta_stages: int = 3
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_max_backtracks: int = 30
    monotone_projection: bool = False
    warm_final_stage_only: bool = True  # skip delta continuation on warm starts
    coincidence_tie: float = 1e-14      # plateau classification threshold (relative)
    coarse_levels: int = 2              # grid-continuation levels for the initial guess
    seed: int = 0
    ordered_sum: bool = False
    strict_qualitative: bool = True
    verbose: bool = False
    progress: object = None             # callable(str) for progress lines


@dataclass
class JetSolution:
    grid: object
    gas: object
    psi: np.ndarray
    Lambda: float
    lam_eps: float
    delta_final: float
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    mach: np.ndarray
    energy: float
    residual: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def _project_monotone(grid, psi):
    """Running-max projection in x on free nodes (optional, off by default)."""
    out = psi.copy()
    run = np.maximum.accumulate(np.where(grid.free_mask, psi, -np.inf), axis=0)
    out = np.where(grid.free_mask, np.maximum(psi, np.where(np.isfinite(run), run, psi)), psi)
    return np.clip(out, 0.0, grid.Q)


def _initial_field(grid, psi0=None):
    """Linear-in-x blend of the inlet data into the outlet data."""
    lat_sharp = grid.psi_sharp[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    if psi0 is not None:
        psi = np.clip(psi0, 0.0, grid.Q)
    else:
        w = (grid.x - grid.x[0]) / (grid.x[-1] - grid.x[0])
        psi = (1.0 - w)[:, None] * lat_sharp[0][None, :] + w[:, None] * lat_sharp[-1][None, :]
    return np.where(grid.node_class == geometry.DIRICHLET, lat_sharp, psi)


def _projected_gradient(psi, grad, grid):
    pg = grad.copy()
    at_lo = (psi <= 0.0) & (pg > 0.0)
    at_hi = (psi >= grid.Q) & (pg < 0.0)
    pg[at_lo | at_hi] = 0.0
    pg[~grid.free_mask] = 0.0
    return pg


def _minimize_stage(en, psi, cfg, tol_res, label=""):
    """Projected preconditioned NCG on one smoothing stage; returns (psi, info)."""
    grid = en.grid
    free = grid.free_mask
    dual = grid.node_dual.reshape(grid.n_i, grid.n_j)
    E, grad, diag = en.energy_and_gradient(psi, want_diag=True)
    M = np.maximum(diag, 1e-300)
    pg = _projected_gradient(psi, grad, grid)
    d = np.where(free, -pg / M, 0.0)
    gMg = float(np.sum(pg * pg / M))
    alpha = 1.0
    n_evals = 1
    trace = []
    it = 0
    for it in range(cfg.max_iter):
        res = float(np.max(np.abs(pg / dual)))
        if it % 50 == 0:
            trace.append((it, E, res))
            if cfg.progress is not None:
                cfg.progress("stage %s iter %6d energy %.12e residual %.3e"
                             % (label, it, E, res))
        if res <= tol_res:
            break
        slope = float(np.sum(grad * d))
        if slope >= 0.0:
            d = np.where(free, -pg / M, 0.0)
            slope = float(np.sum(grad * d))
            if slope >= 0.0:
                break
        # Armijo backtracking with projection
        alpha = min(4.0 * alpha, _safe_alpha(psi, d, grid))
        accepted = False
        for _ in range(cfg.armijo_max_backtracks):
            cand = np.clip(psi + alpha * d, 0.0, grid.Q)
            cand = np.where(free, cand, psi)
            Ec, gc = en.energy_and_gradient(cand)
            n_evals += 1
            dec = float(np.sum(grad * (cand - psi)))
            if Ec <= E + cfg.armijo_c1 * min(dec, 0.0) and Ec <= E:
                accepted = True
                break
            alpha *= cfg.armijo_shrink
        if not accepted:
            # steepest-descent restart; give up only if that fails too
            d = np.where(free, -pg / M, 0.0)
            alpha = _safe_alpha(psi, d, grid)
            cand = np.clip(psi + alpha * d, 0.0, grid.Q)
            cand = np.where(free, cand, psi)
            Ec, gc = en.energy_and_gradient(cand)
            n_evals += 1
            if Ec > E:
                break
        dE = E - Ec
        psi, E = cand, Ec
        pg_new = _projected_gradient(psi, gc, grid)
        if it % 25 == 24:
            _, _, diag = en.energy_and_gradient(psi, want_diag=True)
            M = np.maximum(diag, 1e-300)
            n_evals += 1
        gMg_new = float(np.sum(pg_new * pg_new / M))
        beta = max(0.0, float(np.sum(pg_new * (pg_new - pg) / M)) / max(gMg, 1e-300))
        d = np.where(free, -pg_new / M + beta * d, 0.0)
        grad, pg, gMg = gc, pg_new, gMg_new
        if dE < cfg.tol_energy_rel * max(abs(E), 1.0) and beta == 0.0:
            break
    res = float(np.max(np.abs(_projected_gradient(psi, grad, grid) / dual)))
    return psi, {"energy": E, "residual": res, "iterations": it, "trace": trace,
                 "evals": n_evals}


def _safe_alpha(psi, d, grid):
    """Cap the step so the trial stays within a sane multiple of the bounds."""
    dmax = float(np.max(np.abs(d)))
    if dmax == 0.0:
        return 1.0
    return min(1.0, 2.0 * grid.Q / dmax)


def _gs_sweeps(en, psi, n_sweeps, damping=0.9):
    """Four-color projected pointwise relaxation (robust across the ramp kinks)."""
    grid = en.grid
    free = grid.free_mask
    colors = _color_masks(grid)
    cap = 0.2 * grid.Q
    diag = None
    for sweep in range(n_sweeps):
        for ci, cm in enumerate(colors):
            if ci == 0:
                _, grad, diag = en.energy_and_gradient(psi, want_diag=True)
            else:
                _, grad = en.energy_and_gradient(psi)
            step = np.clip(grad / np.maximum(diag, 1e-300), -cap, cap)
            psi = np.where(cm & free, np.clip(psi - damping * step, 0.0, grid.Q), psi)
    return psi


def _color_masks(grid):
    ii, jj = np.meshgrid(np.arange(grid.n_i), np.arange(grid.n_j), indexing="ij")
    return [(ii % 2 == a) & (jj % 2 == b) for a in (0, 1) for b in (0, 1)]


def _newton_rounds(en, psi, cfg, tol_res, n_outer=10, label=""):
    """Truncated Newton on the smooth region (indicator band frozen).

    Inner linear PCG uses finite-difference Hessian products; the band of
    nodes inside the indicator ramp is excluded from the Newton step (the
    pointwise relaxation owns them), which keeps the FD Hessian smooth.
    Acceptance is on gradient norms; the Armijo energy test cannot resolve
    differences this close to the minimum.
    """
    grid = en.grid
    free = grid.free_mask
    dual = grid.node_dual.reshape(grid.n_i, grid.n_j)
    scale = 1.0 + float(np.max(np.abs(psi)))
    E, grad, diag = en.energy_and_gradient(psi, want_diag=True)
    outer = 0
    for outer in range(n_outer):
        pg = _projected_gradient(psi, grad, grid)
        res = float(np.max(np.abs(pg / dual)))
        if cfg.progress is not None:
            cfg.progress("newton %s outer %3d energy %.12e residual %.3e"
                         % (label, outer, E, res))
        if res <= tol_res:
            break
        band = psi > grid.Q - 2.0 * en.delta
        sel = free & ~band & ~((psi <= 0.0) & (grad > 0.0))
        M = np.maximum(diag, 1e-300)
        b = np.where(sel, -grad, 0.0)
        d = np.zeros_like(psi)
        r = b.copy()
        zv = r / M
        p = zv.copy()
        rz = float(np.sum(r * zv))
        b_norm = float(np.sqrt(np.sum(b * b)))
        if b_norm == 0.0:
            break
        cg_tol = (0.05 if res > 1e3 * tol_res else 0.01) * b_norm
        for _ in range(300):
            pn = float(np.sqrt(np.sum(p * p)))
            if pn == 0.0:
                break
            tau = 1e-7 * scale / pn
            _, g2 = en.energy_and_gradient(psi + tau * p)
            Hp = np.where(sel, (g2 - grad) / tau, 0.0)
            pHp = float(np.sum(p * Hp))
            if pHp <= 0.0:
                if not np.any(d):
                    d = b / M
                break
            a = rz / pHp
            d = d + a * p
            r = r - a * Hp
            if float(np.sqrt(np.sum(r * r))) <= cg_tol:
                break
            zv = r / M
            rz_new = float(np.sum(r * zv))
            p = zv + (rz_new / rz) * p
            rz = rz_new
        accepted = False
        alpha = 1.0
        for _ in range(8):
            cand = np.where(free, np.clip(psi + alpha * np.where(sel, d, 0.0), 0.0, grid.Q), psi)
            Ec, gc, dc = en.energy_and_gradient(cand, want_diag=True)
            pgc = _projected_gradient(cand, gc, grid)
            resc = float(np.max(np.abs(pgc / dual)))
            if resc < res or Ec < E - 1e-13 * abs(E):
                psi, E, grad, diag = cand, Ec, gc, dc
                accepted = True
                break
            alpha *= 0.25
        if not accepted:
            break
    pg = _projected_gradient(psi, grad, grid)
    res = float(np.max(np.abs(pg / dual)))
    return psi, {"energy": E, "residual": res, "iterations": outer, "trace": []}


def _pde_stage(en, psi, cfg, tol_res, label=""):
    """Four-color nonlinear Gauss-Seidel on the smoothed functional."""
    grid = en.grid
    free = grid.free_mask
    dual = grid.node_dual.reshape(grid.n_i, grid.n_j)
    ii, jj = np.meshgrid(np.arange(grid.n_i), np.arange(grid.n_j), indexing="ij")
    colors = [(ii % 2 == a) & (jj % 2 == b) for a in (0, 1) for b in (0, 1)]
    E = en.evaluate(psi)
    trace = []
    it = 0
    for outer in range(cfg.max_outer):
        frozen = psi >= grid.Q * (1.0 - cfg.coincidence_tie)
        for sweep in range(25):
            for cmask in colors:
                _, grad, diag = en.energy_and_gradient(psi, want_diag=True)
                upd = cmask & free & ~frozen
                step = grad / np.maximum(diag, 1e-300)
                psi = np.where(upd, np.clip(psi - step, 0.0, grid.Q), psi)
            it += 1
        E, grad = en.energy_and_gradient(psi)
        res = float(np.max(np.abs(_projected_gradient(psi, grad, grid) / dual)))
        trace.append((it, E, res))
        if cfg.progress is not None:
            cfg.progress("stage %s outer %3d sweeps %4d energy %.12e residual %.3e"
                         % (label, outer, it, E, res))
        if res <= tol_res:
            break
    _, grad = en.energy_and_gradient(psi)
    res = float(np.max(np.abs(_projected_gradient(psi, grad, grid) / dual)))
    return psi, {"energy": E, "residual": res, "iterations": it, "trace": trace}


def _coarsen_solve(grid, gas, Lambda, cfg, tables, psi0):
    """Recursive coarse-grid solve for the initial guess (h doubled per level)."""
    if cfg.coarse_levels <= 0 or min(grid.n_i, grid.n_j) < 24 or psi0 is not None:
        return psi0
    sub = SolverConfig(**{**cfg.__dict__, "coarse_levels": cfg.coarse_levels - 1,
                          "progress": None, "verbose": False})
    try:
        if grid.is_rectangle:
            cg = geometry.build_domain(None, 0.0, grid.R, 2.0 * grid.hy, Q=grid.Q,
                                       rectangle_height=grid.top_height,
                                       x_left=grid.x[0])
            inlet = lambda y: np.interp(y, grid.y, grid.psi_sharp[:grid.n_lattice]
                                        .reshape(grid.n_i, grid.n_j)[0])
            outlet = lambda y: np.interp(y, grid.y, grid.psi_sharp[:grid.n_lattice]
                                         .reshape(grid.n_i, grid.n_j)[-1])
            geometry.boundary_data(cg, grid.Q, max(Lambda, 1e-6),
                                   inlet_profile=inlet, outlet_profile=outlet)
        else:
            # coarse grids may need a wider inlet layer to stay resolvable
            k_c = max(grid.k_mu, 4.2 * 2.0 * grid.hy)
            if k_c >= (grid.b_mu - 1.0) / 4.0:
                return None
            cg = geometry.build_domain(grid.nozzle, grid.mu, grid.R, 2.0 * grid.hy,
                                       s_exp=grid.s_exp, k_mu=k_c, Q=grid.Q)
            geometry.boundary_data(cg, grid.Q, Lambda)
    except Exception:
        return None
    sol = solve_fixed_lambda(cg, gas, Lambda, sub)
    interp = _interp_to(sol.psi, cg, grid)
    return interp


def _interp_to(psi_c, grid_c, grid_f):
    from scipy.interpolate import RegularGridInterpolator
    f = RegularGridInterpolator((grid_c.x, grid_c.y), psi_c, bounds_error=False,
                                fill_value=None)
    xx, yy = np.meshgrid(grid_f.x, grid_f.y, indexing="ij")
    return np.clip(f((xx, yy)), 0.0, grid_f.Q)


def solve_fixed_lambda(grid, gas, Lambda, cfg=None, psi0=None, tables=None):
    """Minimize the discrete functional for fixed Lambda on the given grid."""
    cfg = cfg or SolverConfig()
    if grid.psi_sharp is None:
        geometry.boundary_data(grid, grid.Q, Lambda)
    tables = tables if tables is not None else build_tables(gas)
    lam_eps = gas.tables.lambda_eps_truncated(Lambda) if Lambda > 0.0 else 0.0
    delta0 = default_delta(grid, lam_eps, cfg.c_delta)
    tol_res = cfg.tol_residual * grid.Q / (grid.hx * grid.hy)

    warm = psi0 is not None
    psi0 = _coarsen_solve(grid, gas, Lambda, cfg, tables, psi0)
    psi = _initial_field(grid, psi0)
    trace = []
    info = {"energy": np.nan, "residual": np.nan, "iterations": 0}
    total_iter = 0
    stages = [delta0 * 0.5 ** k for k in range(cfg.delta_stages)]
    if warm and cfg.warm_final_stage_only:
        # a warm start already carries the plateau topology; only the final
        # smoothing width needs re-relaxation
        stages = stages[-1:]
    for k, delta in enumerate(stages):
        en = DiscreteEnergy(grid, gas, Lambda, delta=delta, ordered_sum=cfg.ordered_sum,
                            tables=tables)
        label = "%d/%d" % (k + 1, len(stages))
        # only the final smoothing stage must reach the full tolerance; the
        # earlier stages just have to hand over a good warm start
        stage_tol = tol_res if k == len(stages) - 1 else max(tol_res, 1e-4 * grid.Q)
        if cfg.mode == "pde-fixed-point":
            psi, info = _pde_stage(en, psi, cfg, stage_tol, label=label)
        else:
            psi, info = _minimize_stage(en, psi, cfg, stage_tol, label=label)
            total_iter += info["iterations"]
            best = np.inf
            bad = 0
            for rnd in range(cfg.max_rounds):
                if info["residual"] <= stage_tol:
                    break
                psi = _gs_sweeps(en, psi, cfg.gs_sweeps)
                psi, info = _newton_rounds(en, psi, cfg, stage_tol, label=label)
                total_iter += cfg.gs_sweeps + info["iterations"]
                if info["residual"] > 0.85 * best:
                    bad += 1
                    # stagnation: lean harder on the pointwise relaxation
                    psi = _gs_sweeps(en, psi, 3 * cfg.gs_sweeps)
                    _, grad = en.energy_and_gradient(psi)
                    dualv = grid.node_dual.reshape(grid.n_i, grid.n_j)
                    info["residual"] = float(np.max(np.abs(
                        _projected_gradient(psi, grad, grid) / dualv)))
                else:
                    bad = 0
                best = min(best, info["residual"])
                if bad >= 3:
                    break
        if cfg.monotone_projection:
            psi = _project_monotone(grid, psi)
        trace.extend([(k,) + t for t in info["trace"]])
        total_iter += info["iterations"]
    converged = info["residual"] <= tol_res
    if not converged and cfg.strict_qualitative:
        raise IterationLimitError(
            "solver did not reach residual %.3e (last %.3e) within budget"
            % (tol_res, info["residual"]), residual=info["residual"])

    rho, u, v, mach = derived_fields(grid, gas, psi)
    sol = JetSolution(
        grid=grid, gas=gas, psi=psi, Lambda=float(Lambda), lam_eps=lam_eps,
        delta_final=stages[-1], rho=rho, u=u, v=v, mach=mach,
        energy=info["energy"], residual=info["residual"], iterations=total_iter,
        converged=converged, trace=trace)
    sol.diagnostics["invariants"] = check_invariants(sol, strict=cfg.strict_qualitative)
    return sol


# -- derived fields and diagnostics -------------------------------------------


def nodal_gradient(grid, psi):
    """Second-order nodal gradient of the slot-completed field."""
    v = grid.full_values(psi)
    lat = v[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    dx = np.gradient(lat, grid.hx, axis=0)
    dy = np.empty_like(lat)
    h = grid.hy
    dy[:, 1:-1] = (lat[:, 2:] - lat[:, :-2]) / (2.0 * h)
    # axis row: nonuniform stencil through the virtual axis value psi(0) = 0,
    # exact for the psi ~ y^2 behavior near the axis
    dy[:, 0] = lat[:, 0] / h + lat[:, 1] / (3.0 * h)
    dy[:, -1] = (3.0 * lat[:, -1] - 4.0 * lat[:, -2] + lat[:, -3]) / (2.0 * h)
    return dx, dy


def derived_fields(grid, gas, psi):
    """(rho, u, v, Mach) at nodes from the truncated branch evaluators."""
    dx, dy = nodal_gradient(grid, psi)
    yrow = grid.y[None, :]
    t = (dx * dx + dy * dy) / (yrow * yrow)
    ge, _, _ = gas.tables.g_eps(t.reshape(-1), psi.reshape(-1))
    ge = ge.reshape(psi.shape)
    rho = 1.0 / ge
    u = ge * dy / yrow
    v = -ge * dx / yrow
    gamma = gas.constants.gamma
    mach = np.sqrt(t) * ge ** (0.5 * (gamma + 1.0))
    return rho, u, v, mach


def _interior_mask(grid, margin=1):
    """Free nodes whose full (2*margin+1)^2 neighborhood is free."""
    free = grid.free_mask
    ok = free.copy()
    for di in range(-margin, margin + 1):
        for dj in range(-margin, margin + 1):
            sh = np.roll(np.roll(free, di, axis=0), dj, axis=1)
            ok &= sh
    ok[:margin, :] = ok[-margin:, :] = False
    ok[:, -margin:] = False
    return ok


def check_invariants(sol, strict=False):
    """Qualitative-property report; raises on hard violations when strict."""
    grid, psi = sol.grid, sol.psi
    Q = grid.Q
    free = grid.free_mask
    tol_mono = 1e-10 * Q / grid.hx
    rep = {}

    rep["bounds"] = {
        "min_psi": float(np.min(psi[free])) if free.any() else 0.0,
        "max_psi": float(np.max(psi[free])) if free.any() else 0.0,
        "pass": bool(np.all((psi[free] >= 0.0) & (psi[free] <= Q))),
    }

    dpx = (psi[1:, :] - psi[:-1, :]) / grid.hx
    both_free = free[1:, :] & free[:-1, :]
    min_dpx = float(np.min(dpx[both_free])) if both_free.any() else 0.0
    rep["x_monotonicity"] = {"min_dpsi_dx": min_dpx, "tol": tol_mono,
                             "pass": bool(min_dpx >= -tol_mono)}

    deep = _interior_mask(grid, margin=5)
    strict_zone = deep & (psi > 0.0) & (psi < Q)
    dxc = np.gradient(psi, grid.hx, axis=0)
    min_strict = float(np.min(dxc[strict_zone])) if strict_zone.any() else 0.0
    rep["strict_interior_monotonicity"] = {"min_dpsi_dx": min_strict, "tol": tol_mono,
                                           "pass": bool(min_strict >= -tol_mono)}

    tol_v = tol_mono * sol.gas.constants.g_upper
    vmax = float(np.max(sol.v[strict_zone])) if strict_zone.any() else 0.0
    rep["radial_velocity_sign"] = {"max_v": vmax, "tol": tol_v,
                                   "pass": bool(vmax <= tol_v)}

    lat_sharp = grid.psi_sharp[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    lo_margin = float(np.min((psi - lat_sharp[0][None, :])[free]))
    hi_margin = float(np.min((lat_sharp[-1][None, :] - psi)[free]))
    slack = 1e-9 * Q
    rep["comparison_bracket"] = {"min_lower_margin": lo_margin,
                                 "min_upper_margin": hi_margin,
                                 "pass": bool(lo_margin >= -slack and hi_margin >= -slack)}

    if strict:
        for name in ("bounds", "x_monotonicity", "radial_velocity_sign"):
            if not rep[name]["pass"]:
                raise QualitativeFailureError(
                    "qualitative property %r violated: %s" % (name, rep[name]),
                    prop=name)
    return rep


def verify_subsonic(sol):
    """Max of |grad psi / y|^2 / tc(B(psi)) over the flow region; PASS iff <= 1 - eps."""
    grid, gas = sol.grid, sol.gas
    dx, dy = nodal_gradient(grid, sol.psi)
    yrow = grid.y[None, :]
    t = (dx * dx + dy * dy) / (yrow * yrow)
    tc = gas.tables.sonic_momentum(sol.psi.reshape(-1)).reshape(sol.psi.shape)
    ratio = t / tc
    flow = grid.free_mask & (sol.psi < grid.Q)
    if not flow.any():
        return {"max_ratio": 0.0, "max_mach": 0.0, "pass": True, "worst_node": None}
    idx = np.unravel_index(np.argmax(np.where(flow, ratio, -np.inf)), ratio.shape)
    max_ratio = float(ratio[idx])
    max_mach = float(np.max(sol.mach[flow]))
    return {
        "max_ratio": max_ratio,
        "max_mach": max_mach,
        "epsilon": gas.constants.epsilon,
        "pass": bool(max_ratio <= 1.0 - gas.constants.epsilon + 1e-12),
        "worst_node": {"x": float(grid.x[idx[0]]), "y": float(grid.y[idx[1]]),
                       "psi": float(sol.psi[idx])},
    }


def bernoulli_check(sol, n_streamlines=20):
    """Bernoulli conservation along contoured streamlines + mass-flux slices."""
    grid, gas = sol.grid, sol.gas
    gamma = gas.constants.gamma
    Q = grid.Q
    levels = (np.arange(n_streamlines) + 0.5) / n_streamlines * Q
    worst = 0.0
    for c in levels:
        Bc = float(gas.bernoulli.value(c))
        dev = []
        for i in range(2, grid.n_i - 2, max(1, grid.n_i // 64)):
            col = sol.psi[i]
            k = np.searchsorted(col, c)
            if k == 0 or k >= grid.n_j or not (grid.free_mask[i, min(k, grid.n_j - 1)]):
                continue
            w = (c - col[k - 1]) / max(col[k] - col[k - 1], 1e-300)
            if not 0.0 <= w <= 1.0:
                continue
            uu = (1 - w) * sol.u[i, k - 1] + w * sol.u[i, k]
            vv = (1 - w) * sol.v[i, k - 1] + w * sol.v[i, k]
            rr = (1 - w) * sol.rho[i, k - 1] + w * sol.rho[i, k]
            bb = 0.5 * (uu * uu + vv * vv) + enthalpy(rr, gamma)
            dev.append(abs(bb - Bc) / abs(Bc))
        if dev:
            worst = max(worst, float(np.max(dev)))

    # mass-flux slices: forward-difference quadrature telescopes to Q exactly
    v = grid.full_values(sol.psi)
    lat = v[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    errs = []
    for i in range(2, grid.n_i - 2, max(1, grid.n_i // 16)):
        col = lat[i]
        jtop = int(np.searchsorted(~grid.inside[i], True)) - 1
        if jtop < 1:
            continue
        top_val = Q
        flux = col[0] + np.sum(np.diff(col[:jtop + 1])) + (top_val - col[jtop])
        errs.append(abs(flux - Q) / Q)
    return {
        "max_bernoulli_rel_dev": worst,
        "max_mass_slice_rel_err": float(np.max(errs)) if errs else 0.0,
        "n_streamlines": n_streamlines,
    }
