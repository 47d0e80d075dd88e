"""Upstream/downstream far-field states and the streamline map, solver-free.

This module is the trusted cross-validation oracle: everything is closed-form
algebra plus adaptive Gauss-Kronrod quadrature (absolute tolerance 1e-12 Q).
The streamline map theta(y) is obtained by integrating the closed form of
(theta^2)' rather than the singular ODE at y = 0, so no stiffness appears at
the axis.

Downstream data for free-boundary momentum Lambda:

    rho_d            = 1 / g(Lambda^2, Q)
    u_d(theta(y))    = sqrt(2 (B(psibar(y)) - h(rho_d)))
    theta(y)^2       = (2 rhobar / rho_d) * int_0^y s ubar(s) / u_d(theta(s)) ds
    H_d              = theta(barH)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, interpolate

from .errors import CavitationError, PropertyViolationError, SonicFreeBoundaryError
from .flow_state import critical_quantities, enthalpy, rho_subsonic

__all__ = ["DownstreamState", "upstream_profile", "downstream_state",
           "lambda_monotonicity_probe", "farfield_compare"]


@dataclass
class DownstreamState:
    Lambda: float
    rho_d: float
    H_d: float
    theta_y: np.ndarray       # upstream heights
    theta: np.ndarray         # downstream heights theta(y)
    u_at_theta: np.ndarray    # u_d(theta(y))
    p_d: float
    mass_balance_rel_err: float
    contracts: bool           # theta(y) < y throughout
    rho_exceeds_upstream: bool

    def u_d(self, y):
        """Downstream axial velocity profile on (0, H_d]."""
        f = interpolate.PchipInterpolator(self.theta, self.u_at_theta)
        return f(np.clip(y, 0.0, self.H_d))

    def psi_lower(self, y):
        """Downstream stream function psibar_low(y) = rho_d int_0^y s u_d(s) ds."""
        # by construction psi_lower(theta(y)) = psibar(y); interpolate that pairing
        f = interpolate.PchipInterpolator(self.theta, self._psibar_vals)
        y = np.asarray(y, dtype=float)
        return np.where(y >= self.H_d, self._psibar_vals[-1], f(np.clip(y, 0.0, self.H_d)))


def upstream_profile(gas, y):
    """psibar(y) = rhobar * int_0^y s ubar(s) ds (far-upstream reference)."""
    return gas.bernoulli.rho_bar * gas.profile.flux_integral(y)


def downstream_state(gas, Lambda, n_grid=513, strict=False):
    """Downstream density, velocity profile, streamline map and jet height."""
    c = gas.constants
    gamma = c.gamma
    Q = c.Q
    B_Q = float(gas.bernoulli.value(Q))
    _, _, t_c = critical_quantities(B_Q, gamma)
    Lambda = float(Lambda)
    if Lambda <= 0.0:
        raise SonicFreeBoundaryError("Lambda must be positive")
    if Lambda * Lambda >= t_c:
        raise SonicFreeBoundaryError(
            "Lambda^2 = %.6g is not subsonic: tc(B(Q)) = %.6g" % (Lambda ** 2, t_c))
    rho_d = float(rho_subsonic(Lambda * Lambda, B_Q, gamma))
    h_d = enthalpy(rho_d, gamma)

    rho_bar = gas.bernoulli.rho_bar
    barH = c.barH
    psibar = lambda y: rho_bar * gas.profile.flux_integral(y)

    def u_down(y):
        arg = 2.0 * (np.asarray(gas.bernoulli.value(psibar(y)), dtype=float) - h_d)
        return np.sqrt(np.maximum(arg, 0.0))

    head = 2.0 * (float(gas.bernoulli.value(0.0)) - h_d)
    if head <= 1e-14 * max(abs(B_Q), 1.0):
        raise CavitationError(
            "downstream speed undefined on the axis: B(0) <= h(rho_d) for Lambda=%g"
            % Lambda)

    ys = np.linspace(0.0, barH, n_grid)
    integrand = lambda s: s * float(gas.profile.u(s)) / float(u_down(s))
    panels = np.empty(n_grid - 1)
    for k in range(n_grid - 1):
        val, _ = integrate.quad(integrand, ys[k], ys[k + 1],
                                epsabs=1e-12 * Q, epsrel=1e-12, limit=100)
        panels[k] = val
    theta_sq = (2.0 * rho_bar / rho_d) * np.concatenate([[0.0], np.cumsum(panels)])
    theta = np.sqrt(np.maximum(theta_sq, 0.0))
    H_d = float(theta[-1])
    u_vals = u_down(ys)

    # mass balance rho_d int_0^{H_d} y u_d(y) dy == Q, evaluated in the
    # downstream variable so it genuinely tests the streamline map
    mass = rho_d * float(np.trapezoid(theta * u_vals, theta))
    mass_rel = abs(mass - Q) / Q

    contracts = bool(np.all(theta[1:] < ys[1:] + 1e-12 * barH))
    exceeds = rho_d > rho_bar * (1.0 + 1e-12)
    if strict:
        if exceeds:
            raise PropertyViolationError(
                "downstream density %.6g exceeds upstream %.6g" % (rho_d, rho_bar))
        if float(u_vals[0]) <= 0.0 and rho_d < rho_bar:
            raise PropertyViolationError("u_d(0) must be positive when rho_d < rho_bar")

    st = DownstreamState(
        Lambda=Lambda, rho_d=rho_d, H_d=H_d, theta_y=ys, theta=theta,
        u_at_theta=u_vals, p_d=rho_d ** gamma / gamma,
        mass_balance_rel_err=float(mass_rel), contracts=contracts,
        rho_exceeds_upstream=bool(exceeds))
    st._psibar_vals = psibar(ys)
    return st


def lambda_monotonicity_probe(gas, lambdas, strict=True):
    """H_d(Lambda) table; asserts strict decrease (the uniqueness mechanism)."""
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    rows = []
    for lam in lambdas:
        st = downstream_state(gas, lam)
        rows.append({"Lambda": float(lam), "rho_d": st.rho_d, "H_d": st.H_d,
                     "p_d": st.p_d, "u_d0": float(st.u_at_theta[0])})
    H = np.array([r["H_d"] for r in rows])
    rho = np.array([r["rho_d"] for r in rows])
    ok_H = bool(np.all(np.diff(H) < 0.0))
    ok_rho = bool(np.all(np.diff(rho) < 0.0))
    if strict and not (ok_H and ok_rho):
        raise PropertyViolationError(
            "H_d or rho_d not strictly decreasing in Lambda: check g or quadrature")
    return {"rows": rows, "H_d_strictly_decreasing": ok_H,
            "rho_d_strictly_decreasing": ok_rho}


def farfield_compare(sol, ds, n_off=5):
    """Sup-norm deviations of upstream/downstream slices from the 1-D references."""
    grid, gas = sol.grid, sol.gas
    Q = grid.Q
    x_up = grid.x[0] + n_off * grid.hx
    x_dn = grid.x[-1] - n_off * grid.hx
    i_up = int(np.argmin(np.abs(grid.x - x_up)))
    i_dn = int(np.argmin(np.abs(grid.x - x_dn)))

    ref_up = upstream_profile(gas, grid.y)
    ref_up = np.minimum(ref_up, Q)
    mask_up = grid.free_mask[i_up, :]
    dev_up = np.max(np.abs(sol.psi[i_up, mask_up] - ref_up[mask_up])) / Q if mask_up.any() else np.nan

    dev_dn = np.nan
    if ds is not None:
        ref_dn = np.asarray(ds.psi_lower(grid.y), dtype=float)
        mask_dn = grid.free_mask[i_dn, :]
        dev_dn = np.max(np.abs(sol.psi[i_dn, mask_dn] - ref_dn[mask_dn])) / Q if mask_dn.any() else np.nan
    return {
        "x_upstream": float(grid.x[i_up]), "x_downstream": float(grid.x[i_dn]),
        "upstream_sup_rel": float(dev_up), "downstream_sup_rel": float(dev_dn),
    }
