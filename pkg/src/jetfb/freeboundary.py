"""Free-boundary extraction, the momentum condition on it, and the fit in Lambda.

The free boundary is the level set psi = Q - delta_final/2 (midpoint of the
indicator smoothing ramp).  On a structured grid with axial monotonicity the
level set is a y-graph; its samples are the per-row crossings of the level,
which is exactly the horizontal-edge output of marching squares restricted to
a single-valued graph.  Continuous fit shoots on Lambda by bisection until
the extrapolated orifice offset Upsilon(1) vanishes to tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, solver
from .errors import GraphViolationError, NoFitError, NoFreeBoundaryError

__all__ = ["FreeBoundary", "extract_boundary", "fb_condition_residual",
           "fit_lambda", "FitResult"]


@dataclass
class FreeBoundary:
    y: np.ndarray                 # graph sample heights, ascending
    x: np.ndarray                 # Upsilon(y) samples
    tail_x: np.ndarray            # x-graph tail (downstream)
    tail_y: np.ndarray
    upsilon1: float               # orifice abscissa estimate Upsilon(1)
    dupsilon1: float              # orifice slope estimate Upsilon'(1)
    upsilon1_quad: float          # quadratic-extrapolation variant (diagnostic)
    H_lower: float                # asymptotic jet height estimate
    level: float
    multi_rows: int               # rows with multiple crossings (graph diagnostic)

    @property
    def empty(self):
        return self.y.size == 0


def _row_crossings(col_vals, xs, level):
    """All upward crossings of `level` along one row; returns x positions."""
    below = col_vals < level
    trans = below[:-1] & ~below[1:]
    idx = np.nonzero(trans)[0]
    out = []
    for i in idx:
        w = (level - col_vals[i]) / (col_vals[i + 1] - col_vals[i])
        out.append(xs[i] + w * (xs[i + 1] - xs[i]))
    return out


def extract_boundary(sol, level=None, top_exclude=None):
    """March the level set of psi and return its y-graph and x-graph tails.

    Raises NoFreeBoundaryError when the level set never detaches from the
    boundary data (legitimate at small momentum), GraphViolationError when
    the per-row crossings are substantially multi-valued.
    """
    grid = sol.grid
    Q = grid.Q
    level = Q - 0.5 * sol.delta_final if level is None else float(level)
    v = grid.full_values(sol.psi)
    lat = v[:grid.n_lattice].reshape(grid.n_i, grid.n_j)
    top = grid.top_height

    ys, xs_graph = [], []
    multi = 0
    for j in range(grid.n_j):
        if grid.y[j] >= top:
            break
        crossings = _row_crossings(lat[:, j], grid.x, level)
        if not crossings:
            continue
        if len(crossings) > 1 and crossings[-1] - crossings[0] > 3.0 * grid.hx:
            multi += 1
        ys.append(grid.y[j])
        xs_graph.append(crossings[-1])
    ys = np.asarray(ys)
    xs_graph = np.asarray(xs_graph)

    if ys.size and multi > max(3, ys.size // 10):
        raise GraphViolationError(
            "free boundary is not a y-graph: %d of %d rows multi-valued" % (multi, ys.size))

    # x-graph tail from per-column crossings in y (all columns; downstream use)
    tail_x, tail_y = [], []
    for i in range(grid.n_i):
        col = lat[i, :]
        cr = _row_crossings(col, grid.y, level)
        if cr:
            tail_x.append(grid.x[i])
            tail_y.append(cr[-1])
    tail_x = np.asarray(tail_x)
    tail_y = np.asarray(tail_y)
    if ys.size == 0 and tail_y.size == 0:
        raise NoFreeBoundaryError("level set psi = %.6g not found below the top line" % level)
    dn = tail_x > 0.0
    if np.any(dn):
        tx, ty = tail_x[dn], tail_y[dn]
        # drop the outlet boundary layer (the artificial outlet data bends the
        # contour downward there) and read the asymptotically flat segment
        n_cut = int(np.sum(tx > grid.x[-1] - 5.0 * grid.hx))
        if tx.size - n_cut >= 3:
            tx, ty = tx[:tx.size - n_cut], ty[:ty.size - n_cut]
        if tx.size >= 5:
            slope = np.gradient(ty, tx)
            flat = np.abs(slope) <= 0.15
            run = _longest_run(flat)
            if run is not None and run[1] - run[0] >= 3:
                tx, ty = tx[run[0]:run[1]], ty[run[0]:run[1]]
        k = max(1, ty.size // 10)
        H_lower = float(np.min(ty[-k:]))
    else:
        H_lower = float(ys[0])

    ups1, dups1 = _orifice_estimate(grid, ys, xs_graph, tail_x, tail_y)
    ups1_quad, _ = _orifice_extrapolation(grid, ys, xs_graph, top_exclude)
    return FreeBoundary(y=ys, x=xs_graph, tail_x=tail_x, tail_y=tail_y,
                        upsilon1=ups1, dupsilon1=dups1, upsilon1_quad=ups1_quad,
                        H_lower=H_lower, level=level, multi_rows=multi)


def _longest_run(mask):
    """(start, stop) of the longest True run, or None."""
    best = None
    start = None
    for k, v in enumerate(mask):
        if v and start is None:
            start = k
        if (not v or k == len(mask) - 1) and start is not None:
            stop = k + 1 if (v and k == len(mask) - 1) else k
            if best is None or stop - start > best[1] - best[0]:
                best = (start, stop)
            start = None
    return best


def _orifice_estimate(grid, ys, xs_graph, tail_x, tail_y):
    """Orifice abscissa and slope from the topmost resolved samples.

    The jet may contract by only a cell or two, so Upsilon(1) is anchored to
    the top-row crossing and completed over the remaining half cell with the
    nozzle slope (the smooth-fit tangent); the slope estimate pairs it with
    the nearest column crossing.  Falls back to the plain quadratic when no
    wall slope is available (rectangle/synthetic runs).
    """
    top = grid.top_height
    if ys.size == 0:
        return np.inf, np.nan
    y_top, x_top = ys[-1], xs_graph[-1]
    if y_top < top - 12.0 * grid.hy:
        return np.inf, np.nan
    if grid.nozzle is None:
        return _orifice_extrapolation(grid, ys, xs_graph, None)
    slope = float(grid.nozzle.dN(top))
    ups1 = x_top + slope * (top - y_top)
    dups1 = np.nan
    if tail_x.size:
        cand = np.abs(tail_x - ups1) <= 6.0 * grid.hx
        cand &= tail_y >= top - 8.0 * grid.hy
        cand &= np.abs(tail_y - top) > 1e-12
        if np.any(cand):
            k = np.argmin(np.abs(tail_x[cand] - ups1))
            xc, yc = tail_x[cand][k], tail_y[cand][k]
            if abs(yc - top) > 0.25 * grid.hy:
                dups1 = (xc - ups1) / (yc - top)
    return float(ups1), float(dups1)


def _orifice_extrapolation(grid, ys, xs_graph, top_exclude):
    """Quadratic extrapolation of the y-graph to the orifice height y = 1.

    The contour cannot touch y = 1 on a cell-centered grid and the smoothing
    halo blurs the top rows, so the top three clean samples are fitted.
    Returns +inf when the boundary never approaches the orifice (attached
    flow: Upsilon(1) > 0 beyond the truncation).
    """
    top = grid.top_height
    if top_exclude:
        sel = ys <= top - top_exclude
        if np.count_nonzero(sel) < 3:
            sel = np.ones_like(ys, dtype=bool)
        yy, xx = ys[sel][-3:], xs_graph[sel][-3:]
    else:
        yy, xx = ys[-3:], xs_graph[-3:]
    if yy.size < 3 or yy[-1] < top - 12.0 * grid.hy:
        # boundary stays far below the orifice: attached flow
        return np.inf, np.nan
    c = np.polyfit(yy, xx, 2)
    p = np.poly1d(c)
    return float(p(top)), float(p.deriv()(top))


def fb_condition_residual(sol, fb, n_samples=50, offsets=(1.5, 3.0)):
    """Residual of |grad psi / y| = Lambda sampled one-sided along the boundary.

    The gradient is interpolated from the flow side at two inward offsets and
    linearly extrapolated onto the boundary; the equivalent Phi_eps form is
    reported alongside (they must agree in PASS/FAIL by monotonicity).
    """
    grid, gas = sol.grid, sol.gas
    if fb.empty and fb.tail_y.size == 0:
        raise NoFreeBoundaryError("cannot sample the momentum condition")
    dx, dy = solver.nodal_gradient(grid, sol.psi)
    yrow = grid.y[None, :]
    mom = np.sqrt(dx * dx + dy * dy) / yrow

    # restrict to the free boundary proper: strictly below the top line and
    # outside the artificial-outlet layer
    in_gamma_y = fb.x <= grid.x[-1] - 5.0 * grid.hx
    t_sel = (fb.tail_y < grid.top_height - 1e-12) & \
            (fb.tail_x <= grid.x[-1] - 5.0 * grid.hx)
    n_rows = int(np.count_nonzero(in_gamma_y))
    n_cols = int(np.count_nonzero(t_sel))
    if n_rows == 0 and n_cols == 0:
        raise NoFreeBoundaryError("no boundary samples inside the Gamma window")
    # sample along whichever graph resolves the boundary better
    if n_rows >= max(5, n_cols // 4):
        pts_y, pts_x = fb.y[in_gamma_y], fb.x[in_gamma_y]
        if pts_y.size > n_samples:
            idx = np.linspace(0, pts_y.size - 1, n_samples).round().astype(int)
            pts_y, pts_x = pts_y[idx], pts_x[idx]
        tx = np.gradient(pts_x, pts_y) if pts_y.size > 2 else np.zeros_like(pts_x)
        norm = np.hypot(tx, 1.0)
        # inward = toward decreasing psi: the flow side is to the left/below
        nx = -1.0 / norm
        ny = tx / norm
    else:
        pts_x, pts_y = fb.tail_x[t_sel], fb.tail_y[t_sel]
        if pts_x.size > n_samples:
            idx = np.linspace(0, pts_x.size - 1, n_samples).round().astype(int)
            pts_x, pts_y = pts_x[idx], pts_y[idx]
        fy = np.gradient(pts_y, pts_x) if pts_x.size > 2 else np.zeros_like(pts_y)
        norm = np.hypot(fy, 1.0)
        nx = fy / norm
        ny = -1.0 / norm
    h = min(grid.hx, grid.hy)

    samples = []
    for o in offsets:
        sx = pts_x + o * h * nx
        sy = pts_y + o * h * ny
        samples.append(_bilinear(grid, mom, sx, sy))
    s1, s2 = samples
    o1, o2 = offsets
    on_b = s1 + (s1 - s2) * o1 / (o2 - o1)

    rel = np.abs(on_b - sol.Lambda) / sol.Lambda
    t_b = on_b ** 2
    z_b = np.full_like(t_b, grid.Q - 0.5 * sol.delta_final)
    _, _, Phi = gas.tables.energy_density(t_b, z_b)
    phi_rel = np.abs(Phi - sol.lam_eps ** 2) / max(sol.lam_eps ** 2, 1e-300)
    return {
        "n": int(pts_y.size),
        "max_rel": float(np.max(rel)),
        "mean_rel": float(np.mean(rel)),
        "phi_form_max_rel": float(np.max(phi_rel)),
        "phi_form_mean_rel": float(np.mean(phi_rel)),
        "momentum_samples": on_b.tolist(),
    }


def _bilinear(grid, field, sx, sy):
    fx = np.clip((sx - grid.x[0]) / grid.hx, 0.0, grid.n_i - 1.001)
    fy = np.clip(sy / grid.hy - 0.5, 0.0, grid.n_j - 1.001)
    i = fx.astype(int)
    j = fy.astype(int)
    a = fx - i
    b = fy - j
    return ((1 - a) * (1 - b) * field[i, j] + a * (1 - b) * field[i + 1, j]
            + (1 - a) * b * field[i, j + 1] + a * b * field[i + 1, j + 1])


def delta_refinement_study(grid, gas, Lambda, cfg=None, n_halvings=2):
    """Shift of the extracted boundary under halving of the smoothing width.

    Practical Gamma-convergence gauge: the positions should move by O(delta).
    Returns the list of (delta, median |shift| vs previous stage).
    """
    cfg = cfg or solver.SolverConfig()
    geometry.boundary_data(grid, grid.Q, Lambda)
    lam_eps = gas.tables.lambda_eps_truncated(Lambda)
    from .energy import default_delta
    delta0 = default_delta(grid, lam_eps, cfg.c_delta) * 0.5 ** (cfg.delta_stages - 1)
    rows = []
    prev = None
    psi0 = None
    for k in range(n_halvings + 1):
        delta = delta0 * 0.5 ** k
        sub = solver.SolverConfig(**{**cfg.__dict__, "delta_stages": 1,
                                     "c_delta": cfg.c_delta * 0.5 ** (cfg.delta_stages - 1 + k),
                                     "strict_qualitative": False, "progress": None})
        sol = solver.solve_fixed_lambda(grid, gas, Lambda, cfg=sub, psi0=psi0)
        psi0 = sol.psi
        fb = extract_boundary(sol)
        sel = fb.tail_y < grid.top_height - 1e-12
        cur = (fb.tail_x[sel], fb.tail_y[sel])
        if prev is not None and prev[0].size and cur[0].size:
            y_on_prev = np.interp(cur[0], prev[0], prev[1])
            shift = float(np.median(np.abs(cur[1] - y_on_prev)))
        else:
            shift = np.nan
        rows.append({"delta": float(delta), "median_shift": shift})
        prev = cur
    return rows


@dataclass
class FitResult:
    Lambda: float
    solution: object
    boundary: object
    history: list = field(default_factory=list)
    ambiguous: bool = False
    bracket: tuple = (0.0, 0.0)
    smooth_fit_residual: float = np.nan


def fit_lambda(grid, gas, cfg=None, bracket=None, tol=None, lambda_tol=None,
               expand_tries=3, prefit=True, eval_tol_factor=100.0, progress=None):
    """Bisection on Lambda for continuous fit: |Upsilon(1)| <= tol.

    The bracket must satisfy Upsilon(1) > 0 at the low end and < 0 at the
    high end; endpoints are expanded x2 up to `expand_tries` times when the
    signs fail.  Bisection (not secant) because only endpoint signs are
    guaranteed.  Every evaluation is a fresh coarse-continued solve (warm
    starts across Lambda create metastable-branch hysteresis near the fit);
    bisection solves run at a loosened residual tolerance, the returned
    solution is re-solved at full tolerance.  On fine grids a prefit on the
    doubled spacing narrows the bracket first.
    """
    cfg = cfg or solver.SolverConfig()
    Q = grid.Q
    tol = 2.0 * grid.hy if tol is None else float(tol)
    lambda_tol = 1e-3 * Q if lambda_tol is None else float(lambda_tol)
    C0 = 8.0
    lo, hi = (Q / C0, C0 * Q) if bracket is None else (float(bracket[0]), float(bracket[1]))

    if prefit and not grid.is_rectangle and grid.hy <= 1.0 / 48.0:
        coarse = geometry.build_domain(
            grid.nozzle, grid.mu, grid.R, 2.0 * grid.hy, s_exp=grid.s_exp,
            k_mu=max(grid.k_mu, 4.2 * 2.0 * grid.hy), Q=Q)
        try:
            pre = fit_lambda(coarse, gas, cfg=cfg, bracket=(lo, hi),
                             lambda_tol=lambda_tol, prefit=True,
                             eval_tol_factor=eval_tol_factor, progress=progress)
            width = max(8.0 * lambda_tol, 0.05 * pre.Lambda)
            lo = max(lo, pre.Lambda - width)
            hi = min(hi, pre.Lambda + width)
            if progress is not None:
                progress("prefit(h=%.4g) Lambda*=%.6g; bracket -> (%.6g, %.6g)"
                         % (2.0 * grid.hy, pre.Lambda, lo, hi))
        except NoFitError:
            pass

    eval_cfg = solver.SolverConfig(**{**cfg.__dict__,
                                      "tol_residual": cfg.tol_residual * eval_tol_factor,
                                      "strict_qualitative": False, "progress": None})
    history = []

    def evaluate(Lam, full=False):
        geometry.boundary_data(grid, Q, Lam)
        sol = solver.solve_fixed_lambda(grid, gas, Lam, cfg=cfg if full else eval_cfg)
        try:
            fb = extract_boundary(sol)
            ups = fb.upsilon1
        except NoFreeBoundaryError:
            fb = None
            ups = np.inf
        history.append({"Lambda": float(Lam), "upsilon1": float(ups)})
        if progress is not None:
            progress("fit h=%.4g Lambda=%.6g -> Upsilon(1)=%.6g" % (grid.hy, Lam, ups))
        return ups, sol, fb

    u_lo, _, _ = evaluate(lo)
    for _ in range(expand_tries):
        if u_lo > 0.0:
            break
        lo *= 0.5
        u_lo, _, _ = evaluate(lo)
    u_hi, sol_hi, fb_hi = evaluate(hi)
    for _ in range(expand_tries):
        if u_hi < 0.0:
            break
        hi *= 2.0
        u_hi, sol_hi, fb_hi = evaluate(hi)
    if not (u_lo > 0.0 and u_hi < 0.0):
        raise NoFitError(
            "no sign change: Upsilon(1)=%.3g at Lambda=%.3g, %.3g at %.3g"
            % (u_lo, lo, u_hi, hi))

    best = (hi, u_hi)
    ambiguous = False
    max_bisect = int(np.ceil(np.log2(max((hi - lo) / lambda_tol, 2.0)))) + 1
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        u_mid, sol_mid, fb_mid = evaluate(mid)
        if fb_mid is not None and (abs(u_mid) < abs(best[1]) or not np.isfinite(best[1])):
            best = (mid, u_mid)
        if abs(u_mid) <= tol:
            break
        if u_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= lambda_tol:
            signs = [np.sign(h["upsilon1"]) for h in history[-4:]]
            if len(set(signs)) > 1 and abs(u_mid) > tol:
                ambiguous = True
            break

    Lam = best[0]
    geometry.boundary_data(grid, Q, Lam)
    sol = solver.solve_fixed_lambda(grid, gas, Lam, cfg=cfg)
    fb = extract_boundary(sol)
    res = FitResult(Lambda=float(Lam), solution=sol, boundary=fb,
                    history=history, ambiguous=ambiguous, bracket=(lo, hi))
    if fb is not None and grid.nozzle is not None and np.isfinite(fb.dupsilon1):
        res.smooth_fit_residual = float(abs(fb.dupsilon1 - float(grid.nozzle.dN(1.0))))
    return res
