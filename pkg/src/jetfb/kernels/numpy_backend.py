"""Pure-numpy implementation of the hot cell kernels.

Reference semantics for the compiled core: one fused pass over quadrature
cells computing the discrete energy, its exact gradient with respect to slot
values, and (optionally) the diagonal second-derivative estimate used by the
pde-mode sweeps.  The compiled backend in ``_core.pyx`` mirrors this module
loop for loop; both must agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np

from .tables import hermite_eval

__all__ = ["energy_gradient"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _enthalpy(rho, gamma):
    return rho ** (gamma - 1.0) / (gamma - 1.0)


def _rho_newton(t, B, gamma, rm):
    """Subsonic density on arrays; Newton from rho_m with bisection safeguard."""
    c0 = 2.0 * (gamma - 1.0) / (gamma + 1.0)
    rc = (c0 * B) ** (1.0 / (gamma - 1.0))
    lo = rc.copy()
    hi = rm.copy()
    x = rm.copy()
    ftol = 1e-14 * rc ** (gamma + 1.0)
    for _ in range(80):
        f = 2.0 * x * x * (B - _enthalpy(x, gamma)) - t
        if np.all(np.abs(f) <= ftol):
            break
        lo = np.where(f > 0.0, np.maximum(lo, x), lo)
        hi = np.where(f < 0.0, np.minimum(hi, x), hi)
        df = 4.0 * x * (B - 0.5 * (gamma + 1.0) * _enthalpy(x, gamma))
        xn = x - f / df
        bad = (xn <= lo) | (xn > hi) | ~np.isfinite(xn)
        x = np.where(bad, 0.5 * (lo + hi), xn)
    return x


def _chi(z, Q, delta):
    """C^1 indicator ramp: 1 below Q - delta, 0 at Q; returns (chi, chi', chi'')."""
    x = np.clip((z - (Q - delta)) / delta, 0.0, 1.0)
    chi = 1.0 - x * x * (3.0 - 2.0 * x)
    dchi = -6.0 * x * (1.0 - x) / delta
    d2chi = (12.0 * x - 6.0) / (delta * delta)
    d2chi = np.where((x <= 0.0) | (x >= 1.0), 0.0, d2chi)
    return chi, dchi, d2chi


def energy_gradient(v, cells, cell_y, wx, cell_wy, cell_area, cell_weight,
                    tab, lam2, delta, want_diag=False, ordered_sum=False):
    """Energy, gradient over slots and (optionally) diagonal curvature.

    ``tab`` is a KernelTables instance; ``wx`` the scalar 1/(2 hx).
    """
    gamma = tab.gamma
    eps = tab.epsilon
    g_up = tab.g_upper
    cg = tab.cg
    Q = tab.Q
    z0, dz = tab.z0, tab.dz

    i0, i1, i2, i3 = cells[:, 0], cells[:, 1], cells[:, 2], cells[:, 3]
    va, vb, vc, vd = v[i0], v[i1], v[i2], v[i3]
    zc = 0.25 * (va + vb + vc + vd)
    px = wx * (vb + vd - va - vc)
    py = cell_wy * (vc + vd - va - vb)
    yinv = 1.0 / cell_y
    t = (px * px + py * py) * yinv * yinv

    B = hermite_eval(zc, z0, dz, tab.B, tab.B_s)
    dB = hermite_eval(zc, z0, dz, tab.dB, tab.dB_s)
    tc = hermite_eval(zc, z0, dz, tab.tc, tab.tc_s)
    rm = hermite_eval(zc, z0, dz, tab.rm, tab.rm_s)

    a = (1.0 - eps) * tc
    b = (1.0 - 0.5 * eps) * tc

    G = np.empty_like(t)
    dzG = np.empty_like(t)
    ge = np.full_like(t, g_up)
    dtg_e = np.zeros_like(t)

    live = t < b
    untr = t <= a
    blend = live & ~untr
    trunc = ~live

    if np.any(untr):
        rho = _rho_newton(t[untr], B[untr], gamma, rm[untr])
        g = 1.0 / rho
        dtm = 4.0 * rho * (B[untr] - 0.5 * (gamma + 1.0) * _enthalpy(rho, gamma))
        Au = hermite_eval(zc[untr], z0, dz, tab.A, tab.A_s)
        G[untr] = Au + 2.0 * B[untr] * (rho - rm[untr]) - cg * (rho ** gamma - rm[untr] ** gamma)
        dzG[untr] = dB[untr] * rho
        ge[untr] = g
        dtg_e[untr] = -g * g / dtm

    if np.any(blend):
        tb_, zb_ = t[blend], zc[blend]
        Bb, dBb = B[blend], dB[blend]
        tcb, ab = tc[blend], a[blend]
        rho_a = hermite_eval(zb_, z0, dz, tab.rho_a, tab.rho_a_s)
        T0 = hermite_eval(zb_, z0, dz, tab.T0, tab.T0_s)
        c0 = 2.0 * (gamma - 1.0) / (gamma + 1.0)
        rc2 = (c0 * Bb) ** (2.0 / (gamma - 1.0))
        dtc = 2.0 * rc2 * dBb
        rmb = rm[blend]

        def geps_at(s):
            rho = _rho_newton(s, Bb, gamma, rmb)
            g = 1.0 / rho
            dtm = 4.0 * rho * (Bb - 0.5 * (gamma + 1.0) * _enthalpy(rho, gamma))
            dtg = -g * g / dtm
            dzg = 2.0 * dBb / dtm
            u = (s / tcb - 1.0) / eps
            x = np.clip(2.0 * (u + 1.0), 0.0, 1.0)
            w = 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
            dwdu = -60.0 * x * x * (x - 1.0) * (x - 1.0)
            dw_dt = dwdu / (eps * tcb)
            dw_dz = -dwdu * s * dtc * dBb / (eps * tcb * tcb)
            gev = g * w + (1.0 - w) * g_up
            return (gev,
                    dtg * w + (g - g_up) * dw_dt,
                    dzg * w + (g - g_up) * dw_dz)

        acc_g = np.zeros_like(tb_)
        acc_z = np.zeros_like(tb_)
        L = tb_ - ab
        for k in range(_GL_X.size):
            s_k = ab + L * _GL_X[k]
            gv, _, zv = geps_at(s_k)
            acc_g += _GL_W[k] * gv
            acc_z += _GL_W[k] * zv
        G[blend] = T0 + 0.5 * acc_g * L
        dzG[blend] = dBb * rho_a + 0.5 * acc_z * L
        gv, dtv, _ = geps_at(tb_)
        ge[blend] = gv
        dtg_e[blend] = dtv

    if np.any(trunc):
        zt = zc[trunc]
        T1 = hermite_eval(zt, z0, dz, tab.T1, tab.T1_s)
        V = hermite_eval(zt, z0, dz, tab.V, tab.V_s)
        rho_a = hermite_eval(zt, z0, dz, tab.rho_a, tab.rho_a_s)
        G[trunc] = T1 + 0.5 * g_up * (t[trunc] - b[trunc])
        dzG[trunc] = dB[trunc] * rho_a + V

    chi, dchi, d2chi = _chi(zc, Q, delta)

    wgt = cell_weight * cell_area
    e_cells = wgt * cell_y * (G + lam2 * chi)
    if ordered_sum:
        energy = math.fsum(e_cells.tolist())
    else:
        energy = float(np.sum(e_cells))

    base_z = 0.25 * cell_y * (dzG + lam2 * dchi) * wgt
    gy = ge * yinv * wgt
    gpx = gy * px * wx
    gpy = gy * py * cell_wy
    n_slots = v.size
    grad = np.zeros(n_slots)
    # corner order (SW, SE, NW, NE): sigma_x = (-,+,-,+), sigma_y = (-,-,+,+)
    g0 = -gpx - gpy + base_z
    g1 = +gpx - gpy + base_z
    g2 = -gpx + gpy + base_z
    g3 = +gpx + gpy + base_z
    grad += np.bincount(i0, weights=g0, minlength=n_slots)
    grad += np.bincount(i1, weights=g1, minlength=n_slots)
    grad += np.bincount(i2, weights=g2, minlength=n_slots)
    grad += np.bincount(i3, weights=g3, minlength=n_slots)

    if not want_diag:
        return energy, grad, None

    lap = ge * yinv * (wx * wx + cell_wy * cell_wy) * wgt
    curv = 2.0 * dtg_e * yinv * yinv * yinv * wgt
    # |chi''|: curvature magnitude keeps pointwise steps damped on the
    # concave half of the ramp (plain chi'' would cancel the diffusion term)
    pen = cell_y * lam2 * np.abs(d2chi) / 16.0 * wgt
    diag = np.zeros(n_slots)
    for idx, sx, sy in ((i0, -1.0, -1.0), (i1, 1.0, -1.0), (i2, -1.0, 1.0), (i3, 1.0, 1.0)):
        q = sx * px * wx + sy * py * cell_wy
        diag += np.bincount(idx, weights=lap + curv * q * q + pen, minlength=n_slots)
    return energy, grad, diag
