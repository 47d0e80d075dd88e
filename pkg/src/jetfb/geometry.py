"""Nozzle description, truncated computational domain and boundary data.

The domain is the subgraph of a wall-height function ybar(x): the nozzle wall
x = N(y) re-expressed as y = ybar(x) for x < 0, continued by the horizontal
line y = 1 for x >= 0 (the top of the would-be jet region).  The grid is
vertex-centered in x and cell-centered in y, so no node sits on the symmetry
axis y = 0.

Discrete structure handed to the energy module:

* a lattice of value slots (n_i columns by n_j rows) plus one virtual axis row
  (psi = 0 at y = 0) and one virtual top row (psi = Q at the horizontal wall);
* quadrature cells with their four corner slots, center height, y half-width,
  area and inside-area fraction.  Cells cut by the slanted wall keep their
  inside fraction as a weight; half-height cells close the axis and the
  horizontal wall so that Dirichlet data sits exactly on the boundary;
* first-layer exterior slots carry Shortley-Weller style one-sided linear
  extrapolation through the wall (affine in one interior source slot).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, optimize

from .errors import (
    DomainError,
    InvalidLambdaError,
    ResolutionError,
    TruncationTooDeepError,
)

__all__ = ["NozzleGeometry", "DomainGrid", "build_domain", "boundary_data", "psi_dagger"]

# node classification codes
FREE = 0
DIRICHLET = 1
EXTRAP = 2

# 8-point rule for the cut-cell inside fractions
_FX, _FW = np.polynomial.legendre.leggauss(8)
_FX = 0.5 * (_FX + 1.0)
_FW = 0.5 * _FW


class NozzleGeometry:
    """Wall x = N(y) for y in [1, barH), with N(1) = 0 and N -> -inf at barH."""

    def __init__(self, N, dN, barH):
        self.N = N
        self.dN = dN
        self.barH = float(barH)

    @classmethod
    def log(cls, barH, amplitude=1.0):
        """Built-in nozzle N(y) = a*log((barH - y)/(barH - 1))."""
        a = float(amplitude)
        H = float(barH)
        return cls(lambda y: a * np.log((H - y) / (H - 1.0)),
                   lambda y: -a / (H - np.asarray(y, dtype=float)),
                   H)

    @classmethod
    def from_samples(cls, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if y.ndim != 1 or y.size < 4 or np.any(np.diff(y) <= 0.0):
            raise DomainError("nozzle samples need a strictly increasing y grid")
        spl = interpolate.PchipInterpolator(y, x)
        return cls(spl, spl.derivative(1), y[-1])

    def validate(self, mu):
        if abs(float(self.N(1.0))) > 1e-9:
            raise DomainError("nozzle must satisfy N(1) = 0")
        # divergence check at the deepest float-representable heights: either the
        # wall is already below -10*mu there, or it is still dropping steeply
        y_hi = np.nextafter(self.barH, 1.0)
        y_lo = self.barH - 1e-9 * (self.barH - 1.0)
        n_hi = float(self.N(y_hi))
        if n_hi > -10.0 * mu and n_hi > float(self.N(y_lo)) - 1.0:
            raise TruncationTooDeepError(
                "nozzle does not open fast enough: N(barH-) must diverge to -inf")

    def depth_height(self, mu):
        """b_mu with N(b_mu) = -mu."""
        f = lambda y: float(self.N(y)) + mu
        lo, hi = 1.0, self.barH - 1e-12 * max(1.0, self.barH)
        if f(lo) <= 0.0:
            raise TruncationTooDeepError("N(1) already below -mu")
        # N is continuous with N -> -inf, so a sign change exists near barH
        while f(hi) > 0.0:
            hi = 0.5 * (hi + self.barH)
            if self.barH - hi < 1e-14:
                raise TruncationTooDeepError("nozzle never reaches depth -mu")
        return float(optimize.brentq(f, lo, hi, xtol=1e-14))


@dataclass
class DomainGrid:
    """Structured truncated domain with slot/cell tables (immutable after build)."""

    hx: float
    hy: float
    x: np.ndarray                 # (n_i,) column positions
    y: np.ndarray                 # (n_j,) row heights (cell-centered)
    mu: float
    R: float
    Q: float
    top_height: float             # horizontal-wall height (1 for jets)
    ybar: np.ndarray              # (n_i,) wall height over each column
    node_class: np.ndarray        # (n_i, n_j) int8
    inside: np.ndarray            # (n_i, n_j) bool, y_j < ybar(x_i)
    # extrapolated slots: lattice flat ids, affine data
    extrap_ids: np.ndarray
    extrap_src: np.ndarray
    extrap_alpha: np.ndarray
    extrap_beta: np.ndarray
    # cells
    cells: np.ndarray             # (n_cells, 4) int32 slot ids (SW, SE, NW, NE)
    cell_y: np.ndarray
    cell_wy: np.ndarray           # 1/(2*dy_cell)
    cell_area: np.ndarray
    cell_weight: np.ndarray
    node_dual: np.ndarray         # (n_i*n_j,) dual areas for residual scaling
    # geometry extras
    b_mu: float = 0.0
    k_mu: float = 0.0
    s_exp: float = 1.75
    nozzle: object = None
    is_rectangle: bool = False
    psi_sharp: np.ndarray = field(default=None)   # (n_slots,) Dirichlet data, filled later

    # -- slot layout ---------------------------------------------------------

    @property
    def n_i(self):
        return self.x.size

    @property
    def n_j(self):
        return self.y.size

    @property
    def n_lattice(self):
        return self.n_i * self.n_j

    @property
    def n_slots(self):
        return self.n_lattice + 2 * self.n_i

    def lattice_id(self, i, j):
        return i * self.n_j + j

    def axis_id(self, i):
        return self.n_lattice + i

    def top_id(self, i):
        return self.n_lattice + self.n_i + i

    def full_values(self, psi):
        """Assemble the slot value vector from lattice values (n_i, n_j)."""
        v = np.empty(self.n_slots)
        v[:self.n_lattice] = psi.reshape(-1)
        v[self.n_lattice:self.n_lattice + self.n_i] = 0.0           # axis
        v[self.n_lattice + self.n_i:] = self.Q                      # top wall
        if self.extrap_ids.size:
            v[self.extrap_ids] = self.extrap_alpha + self.extrap_beta * v[self.extrap_src]
        return v

    def pullback_gradient(self, grad_slots):
        """Chain rule through extrapolated slots; returns lattice-shaped array."""
        g = grad_slots[:self.n_lattice].copy()
        if self.extrap_ids.size:
            np.add.at(g, self.extrap_src, self.extrap_beta * grad_slots[self.extrap_ids])
            g[self.extrap_ids] = 0.0
        g[(self.node_class != FREE).reshape(-1)] = 0.0
        return g.reshape(self.n_i, self.n_j)

    def pullback_diag(self, diag_slots):
        """Second-derivative chain rule (beta^2 term) for the extrapolated slots."""
        d = diag_slots[:self.n_lattice].copy()
        if self.extrap_ids.size:
            np.add.at(d, self.extrap_src,
                      self.extrap_beta ** 2 * diag_slots[self.extrap_ids])
            d[self.extrap_ids] = 0.0
        return d.reshape(self.n_i, self.n_j)

    @property
    def free_mask(self):
        return self.node_class == FREE


def _wall_height_fn(nozzle, mu, b_mu, top_height):
    """ybar(x): top_height for x >= 0, N^{-1}(x) on [-mu, 0)."""
    ys = np.linspace(1.0, b_mu, 4097)
    xs = np.asarray(nozzle.N(ys), dtype=float)
    xs[0] = 0.0
    order = np.argsort(xs)
    xs_s, ys_s = xs[order], ys[order]

    def ybar(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, top_height)
        lo = x < 0.0
        out = np.where(lo, np.interp(x, xs_s, ys_s), out)
        return out

    return ybar


def build_domain(nozzle, mu, R, h, s_exp=1.75, k_mu=None, Q=1.0,
                 rectangle_height=None, x_left=None):
    """Construct the truncated domain grid.

    ``rectangle_height`` switches to a plain strip [x_left, R] x (0, height)
    with a horizontal Dirichlet top (used for manufactured and far-field
    reference solves); the nozzle is ignored in that mode.
    """
    if h <= 0.0 or R <= 0.0:
        raise DomainError("h and R must be positive")
    rect = rectangle_height is not None
    if rect:
        top = float(rectangle_height)
        x0 = float(x_left if x_left is not None else 0.0)
        hy = top / max(1, round(top / h))
        b_mu, k_mu_val = 0.0, 0.0
    else:
        if mu <= 0.0:
            raise DomainError("mu must be positive")
        nozzle.validate(mu)
        top = 1.0
        x0 = -float(mu)
        hy = 1.0 / max(1, round(1.0 / h))
        b_mu = nozzle.depth_height(mu)
        if k_mu is None:
            k_mu_val = (b_mu - 1.0) / 8.0
        else:
            k_mu_val = float(k_mu)
        if not 0.0 < k_mu_val < (b_mu - 1.0) / 4.0:
            raise DomainError("k_mu must lie in (0, (b_mu - 1)/4)")
        if hy > k_mu_val / 4.0:
            raise ResolutionError(
                "grid does not resolve the inlet layer: hy = %.4g > k_mu/4 = %.4g"
                % (hy, k_mu_val / 4.0))

    n_cols = max(2, round((R - x0) / h))
    hx = (R - x0) / n_cols
    xs = x0 + hx * np.arange(n_cols + 1)
    y_max = top if rect else b_mu
    n_rows = int(np.floor(y_max / hy - 0.5 + 1e-12)) + 1
    if not rect:
        # two exterior rows beyond the wall top so the slanted wall stays
        # closed by cut cells and extrapolated slots everywhere
        n_rows += 2
    ys = (np.arange(n_rows) + 0.5) * hy

    if rect:
        ybar_vec = np.full(xs.size, top)
        ybar = lambda x: np.full(np.asarray(x, dtype=float).shape, top)
    else:
        ybar = _wall_height_fn(nozzle, mu, b_mu, top)
        ybar_vec = ybar(xs)

    inside = ys[None, :] < ybar_vec[:, None] - 1e-14
    node_class = np.full((xs.size, ys.size), FREE, dtype=np.int8)
    node_class[~inside] = DIRICHLET
    node_class[0, :] = DIRICHLET
    node_class[-1, :] = DIRICHLET

    grid = DomainGrid(
        hx=hx, hy=hy, x=xs, y=ys, mu=0.0 if rect else float(mu), R=float(R), Q=float(Q),
        top_height=top, ybar=ybar_vec, node_class=node_class, inside=inside,
        extrap_ids=np.empty(0, dtype=np.int64), extrap_src=np.empty(0, dtype=np.int64),
        extrap_alpha=np.empty(0), extrap_beta=np.empty(0),
        cells=np.empty((0, 4), dtype=np.int32), cell_y=np.empty(0), cell_wy=np.empty(0),
        cell_area=np.empty(0), cell_weight=np.empty(0), node_dual=np.empty(0),
        b_mu=b_mu, k_mu=k_mu_val, s_exp=float(s_exp), nozzle=None if rect else nozzle,
        is_rectangle=rect)
    _build_extrapolation(grid, ybar)
    _build_cells(grid, ybar)
    return grid


def _build_extrapolation(grid, ybar):
    """Shortley-Weller affine closure for first-layer exterior slots."""
    ids, srcs, alphas, betas = [], [], [], []
    nc = grid.node_class
    Q = grid.Q
    snap = 0.1 * min(grid.hx, grid.hy)
    for i in range(1, grid.n_i - 1):
        yw = grid.ybar[i]
        for j in range(grid.n_j):
            if grid.inside[i, j]:
                continue
            cand = None
            # vertical: through the wall over this column
            if j > 0 and grid.inside[i, j - 1] and nc[i, j - 1] == FREE:
                d_in = yw - grid.y[j - 1]
                d_out = grid.y[j] - yw
                if d_in > snap:
                    cand = (d_in / grid.hy, grid.lattice_id(i, j - 1), d_out / d_in)
            # horizontal: through the wall over this row (slanted band only)
            if grid.nozzle is not None and grid.top_height < grid.y[j] < grid.nozzle.barH:
                xw = float(grid.nozzle.N(grid.y[j]))
                if i > 0 and grid.inside[i - 1, j] and nc[i - 1, j] == FREE:
                    d_in = xw - grid.x[i - 1]
                    d_out = grid.x[i] - xw
                    if d_in > snap and 0.0 <= d_out <= grid.hx:
                        c2 = (d_in / grid.hx, grid.lattice_id(i - 1, j), d_out / d_in)
                        if cand is None or c2[0] > cand[0]:
                            cand = c2
            if cand is not None:
                _, src, r = cand
                ids.append(grid.lattice_id(i, j))
                srcs.append(src)
                alphas.append(Q * (1.0 + r))
                betas.append(-r)
                nc[i, j] = EXTRAP
    grid.extrap_ids = np.asarray(ids, dtype=np.int64)
    grid.extrap_src = np.asarray(srcs, dtype=np.int64)
    grid.extrap_alpha = np.asarray(alphas)
    grid.extrap_beta = np.asarray(betas)


def _inside_fraction(grid, ybar, i, j):
    """Fraction of cell [x_i, x_{i+1}] x [y_j, y_{j+1}] below the wall."""
    xa, xb = grid.x[i], grid.x[i + 1]
    ya = grid.y[j]
    xq = xa + (xb - xa) * _FX
    height = np.clip(ybar(xq) - ya, 0.0, grid.hy)
    return float(np.dot(height, _FW)) / grid.hy


def _build_cells(grid, ybar):
    cells, cy, cwy, car, cw = [], [], [], [], []
    hx, hy = grid.hx, grid.hy
    top = grid.top_height
    j_top = int(np.searchsorted(grid.y, top) - 1)  # last row strictly below top

    # axis half-cells: Dirichlet psi = 0 on y = 0
    for i in range(grid.n_i - 1):
        cells.append((grid.axis_id(i), grid.axis_id(i + 1),
                      grid.lattice_id(i, 0), grid.lattice_id(i + 1, 0)))
        dy = grid.y[0]
        cy.append(0.5 * dy)
        cwy.append(1.0 / (2.0 * dy))
        car.append(hx * dy)
        cw.append(1.0)

    # full lattice cells
    for i in range(grid.n_i - 1):
        span_flat = grid.ybar[i] == top and grid.ybar[i + 1] == top
        for j in range(grid.n_j - 1):
            ya, yb = grid.y[j], grid.y[j + 1]
            if span_flat:
                # horizontal wall: half-cells close the boundary
                if yb >= top:
                    continue
                w = 1.0
            else:
                lo = min(grid.ybar[i], grid.ybar[i + 1])
                hi = max(grid.ybar[i], grid.ybar[i + 1])
                if yb <= lo:
                    w = 1.0
                elif ya >= hi:
                    continue
                else:
                    w = _inside_fraction(grid, ybar, i, j)
                    if w <= 0.0:
                        continue
            cells.append((grid.lattice_id(i, j), grid.lattice_id(i + 1, j),
                          grid.lattice_id(i, j + 1), grid.lattice_id(i + 1, j + 1)))
            cy.append(0.5 * (ya + yb))
            cwy.append(1.0 / (2.0 * hy))
            car.append(hx * hy)
            cw.append(w)

    # top half-cells under the horizontal wall: Dirichlet psi = Q at y = top
    for i in range(grid.n_i - 1):
        if not (grid.ybar[i] == top and grid.ybar[i + 1] == top):
            continue
        dy = top - grid.y[j_top]
        cells.append((grid.lattice_id(i, j_top), grid.lattice_id(i + 1, j_top),
                      grid.top_id(i), grid.top_id(i + 1)))
        cy.append(0.5 * (grid.y[j_top] + top))
        cwy.append(1.0 / (2.0 * dy))
        car.append(hx * dy)
        cw.append(1.0)

    grid.cells = np.asarray(cells, dtype=np.int32)
    grid.cell_y = np.asarray(cy)
    grid.cell_wy = np.asarray(cwy)
    grid.cell_area = np.asarray(car)
    grid.cell_weight = np.asarray(cw)

    dual = np.zeros(grid.n_slots)
    np.add.at(dual, grid.cells.reshape(-1),
              np.repeat(0.25 * grid.cell_weight * grid.cell_area, 4))
    grid.node_dual = np.maximum(dual[:grid.n_lattice], 1e-300)


def psi_dagger(y, Lambda, Q):
    """Outlet boundary profile; supersolution of the radial operator.

    min(Lambda*y^2*e^(1-y), Q) when Lambda > Q (the cap height H_* solves
    Lambda*H^2*e^(1-H) = Q), and Q*y^2*e^(1-y) otherwise.
    """
    y = np.asarray(y, dtype=float)
    if Lambda <= 0.0:
        raise InvalidLambdaError("Lambda must be positive")
    if Lambda > Q:
        return np.minimum(Lambda * y * y * np.exp(1.0 - y), Q)
    return Q * y * y * np.exp(1.0 - y)


def fit_cap_height(Lambda, Q):
    """H_* with Lambda H_*^2 e^(1-H_*) = Q (only meaningful for Lambda > Q)."""
    if Lambda <= Q:
        return 1.0
    f = lambda H: Lambda * H * H * np.exp(1.0 - H) - Q
    try:
        return float(optimize.brentq(f, 1e-12, 1.0, xtol=1e-14))
    except ValueError as exc:
        raise InvalidLambdaError("no cap height H_* in (0, 1) for Lambda = %g" % Lambda) from exc


def boundary_data(grid, Q, Lambda, inlet_profile=None, outlet_profile=None):
    """Fill the Dirichlet slot data for the truncated jet problem.

    Zero on the axis and on the inlet below b'_mu, the power ramp across the
    inlet layer, Q on the solid wall and the horizontal top, and the outlet
    profile psi_dagger(y; Lambda).  ``inlet_profile``/``outlet_profile``
    override the defaults with callables of y (rectangle/reference solves).
    """
    v = np.full(grid.n_slots, Q)
    v[grid.n_lattice:grid.n_lattice + grid.n_i] = 0.0
    lat = np.full((grid.n_i, grid.n_j), Q)

    if inlet_profile is None:
        b_prime = grid.b_mu - grid.k_mu
        ramp = np.clip((grid.y - b_prime) / grid.k_mu, 0.0, 1.0) ** grid.s_exp
        lat[0, :] = Q * np.where(grid.y <= b_prime, 0.0, ramp)
        lat[0, grid.y >= grid.b_mu] = Q
    else:
        lat[0, :] = inlet_profile(grid.y)
    if outlet_profile is None:
        lat[-1, :] = psi_dagger(grid.y, Lambda, Q)
        lat[-1, grid.y >= grid.top_height] = Q
    else:
        lat[-1, :] = outlet_profile(grid.y)

    # interior Dirichlet slots (wall and beyond) stay at Q
    interior_cols = slice(1, grid.n_i - 1)
    lat_interior = np.full((grid.n_i - 2, grid.n_j), Q)
    lat[interior_cols, :] = lat_interior

    v[:grid.n_lattice] = lat.reshape(-1)
    grid.psi_sharp = v
    return v
