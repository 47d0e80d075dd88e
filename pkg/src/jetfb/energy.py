"""Discrete energy functional, its exact gradient and the Euler-Lagrange residual.

The functional is the midpoint-quadrature sum over cells

    J(psi) = sum_c w_c |c| y_c [ G_eps(|grad psi / y|^2, psi) + lambda_eps^2 chi_delta(psi) ]

with cell-centered bilinear gradients from the four corner slots, so J is C^1
in the nodal values and the gradient returned here is its exact derivative
(the directional-derivative consistency test is part of the suite).  The
exact indicator of the variational problem is replaced by a C^1 ramp of width
``delta`` in psi; outer continuation over delta belongs to the solver.
"""

from __future__ import annotations

import numpy as np

from . import geometry
from .errors import NonFiniteFieldError
from .kernels import energy_gradient
from .kernels.tables import build_tables

__all__ = ["DiscreteEnergy", "default_delta", "inlet_subsolution_margin",
           "outlet_supersolution_margin"]


def default_delta(grid, lam_eps, c_delta=1.0, y_ref=1.0):
    """Indicator smoothing width: proportional to the stream jump across one cell."""
    scale = lam_eps if lam_eps > 0.0 else grid.Q
    return c_delta * grid.hy * scale * y_ref


class DiscreteEnergy:
    """Evaluator bundle for one (grid, gas, Lambda) triple at fixed delta."""

    def __init__(self, grid, gas, Lambda, delta=None, c_delta=1.0,
                 ordered_sum=False, tables=None):
        self.grid = grid
        self.gas = gas
        self.Lambda = float(Lambda)
        # Lambda = 0 disables the indicator term (no-free-boundary reference solves)
        self.lam_eps = gas.tables.lambda_eps_truncated(Lambda) if Lambda > 0.0 else 0.0
        self.delta = float(delta) if delta is not None else default_delta(grid, self.lam_eps, c_delta)
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        self.ordered_sum = bool(ordered_sum)
        self.tab = tables if tables is not None else build_tables(gas)
        self._wx = 1.0 / (2.0 * grid.hx)

    # -- core kernel call ----------------------------------------------------

    def _call_kernel(self, psi, lam2, want_diag=False):
        g = self.grid
        v = g.full_values(psi)
        if not np.all(np.isfinite(v)):
            raise NonFiniteFieldError("field contains NaN or Inf")
        return energy_gradient(
            v, g.cells, g.cell_y, self._wx, g.cell_wy, g.cell_area, g.cell_weight,
            self.tab, lam2, self.delta, want_diag=want_diag,
            ordered_sum=self.ordered_sum)

    def evaluate(self, psi):
        E, _, _ = self._call_kernel(psi, self.lam_eps ** 2)
        return E

    def gradient(self, psi):
        _, grad, _ = self._call_kernel(psi, self.lam_eps ** 2)
        return self.grid.pullback_gradient(grad)

    def energy_and_gradient(self, psi, want_diag=False):
        E, grad, diag = self._call_kernel(psi, self.lam_eps ** 2, want_diag=want_diag)
        g = self.grid.pullback_gradient(grad)
        if want_diag:
            return E, g, self.grid.pullback_diag(diag)
        return E, g

    def el_residual(self, psi, mask_coincidence=True):
        """Residual of div(g_eps grad psi / y) - y dzG_eps at interior nodes.

        The indicator term is omitted (it is not part of the Euler-Lagrange
        operator); with ``mask_coincidence`` the residual is zeroed where
        psi >= Q - delta, the convention used by the convergence metric.
        """
        _, grad, _ = self._call_kernel(psi, 0.0)
        r = -self.grid.pullback_gradient(grad)
        dual = self.grid.node_dual.reshape(self.grid.n_i, self.grid.n_j)
        r = r / dual
        if mask_coincidence:
            r[psi >= self.grid.Q - self.delta] = 0.0
        return r


# -- discrete sub/supersolution checks (boundary-data admissibility) ---------

def _profile_strip_residual(gas, profile_values, y, hy, Q, top):
    """EL residual of a y-only profile on a narrow strip (middle column)."""
    n_cols = 5
    grid = geometry.build_domain(None, 0.0, n_cols * hy, hy, Q=Q,
                                 rectangle_height=top, x_left=0.0)
    prof = lambda yy: np.interp(yy, y, profile_values)
    geometry.boundary_data(grid, Q, 1.0, inlet_profile=prof, outlet_profile=prof)
    psi = np.tile(prof(grid.y), (grid.n_i, 1))
    en = DiscreteEnergy(grid, gas, Lambda=max(1e-6, 0.5 * np.sqrt(
        gas.tables.sonic_momentum(Q))), delta=1e-3 * Q)
    r = en.el_residual(psi, mask_coincidence=False)
    mid = grid.n_i // 2
    return grid.y, r[mid]


def inlet_subsolution_margin(gas, grid):
    """min over inlet-layer rows of the EL residual of the inlet profile.

    Nonnegative margin means the profile is a discrete subsolution (the
    requirement behind the k_mu halving rule).
    """
    Q = grid.Q
    b_prime = grid.b_mu - grid.k_mu
    ramp = np.clip((grid.y - b_prime) / grid.k_mu, 0.0, 1.0) ** grid.s_exp
    prof = Q * np.where(grid.y <= b_prime, 0.0, ramp)
    ys, r = _profile_strip_residual(gas, prof, grid.y, grid.hy, Q, grid.b_mu)
    sel = (ys > b_prime + 0.5 * grid.hy) & (ys < grid.b_mu - 0.5 * grid.hy)
    if not np.any(sel):
        return 0.0
    return float(np.min(r[sel]))


def outlet_supersolution_margin(gas, grid, Lambda):
    """max over outlet rows of the EL residual of psi_dagger (<= 0 required)."""
    Q = grid.Q
    prof = geometry.psi_dagger(grid.y, Lambda, Q)
    ys, r = _profile_strip_residual(gas, prof, grid.y, grid.hy, Q, grid.top_height)
    h_star = geometry.fit_cap_height(Lambda, Q) if Lambda > Q else 1.0
    sel = (ys > 2.0 * grid.hy) & (ys < grid.top_height - 2.0 * grid.hy)
    # the min() kink at H_* is distributional; skip its immediate row
    sel &= np.abs(ys - h_star) > grid.hy
    if not np.any(sel):
        return 0.0
    return float(np.max(r[sel]))
