"""Pointwise thermodynamic and kinematic algebra for the stream-function model.

Everything here is exact-branch math: the Bernoulli function built from the
upstream axial velocity, the subsonic density inversion, the smooth subsonic
truncation, and the integrands of the variational functional.  All evaluators
are pure and vectorized over numpy arrays; they are safe to share between
workers once constructed.

Notation used throughout (``z`` is a stream-function value, ``t`` a squared
scaled momentum ``|grad(psi)/y|^2``):

    h(rho)      = rho^(gamma-1)/(gamma-1)               (enthalpy)
    tm(rho, s)  = 2 rho^2 (s - h(rho))                  (squared momentum)
    rho_c(s), rho_m(s)                                  (critical/maximum density)
    tc(s)       = rho_c(s)^(gamma+1)                    (squared sonic momentum)
    g(t, z)     = 1/rho on the subsonic branch of tm(rho, B(z)) = t
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import (
    DomainError,
    InvalidProfileError,
    SonicFreeBoundaryError,
    SonicStateError,
)

__all__ = [
    "FlowConstants",
    "UpstreamProfile",
    "BernoulliFn",
    "FlowTables",
    "GasModel",
    "enthalpy",
    "sound_speed",
    "critical_quantities",
    "momentum_sq",
    "rho_subsonic",
    "upstream_density",
    "streamline_height",
    "cutoff",
    "make_gas_model",
]

# 16-point Gauss-Legendre rule on [0, 1]; the truncation blend integrand is
# smooth inside its support so a fixed rule reaches machine accuracy.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def enthalpy(rho, gamma):
    return rho ** (gamma - 1.0) / (gamma - 1.0)


def sound_speed(rho, gamma):
    return rho ** (0.5 * (gamma - 1.0))


def critical_quantities(s, gamma):
    """Critical density, maximum density and squared sonic momentum at Bernoulli value s."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise DomainError("Bernoulli value must be positive")
    rho_c = (2.0 * (gamma - 1.0) / (gamma + 1.0) * s) ** (1.0 / (gamma - 1.0))
    rho_m = ((gamma - 1.0) * s) ** (1.0 / (gamma - 1.0))
    t_c = rho_c ** (gamma + 1.0)
    return rho_c, rho_m, t_c


def momentum_sq(rho, s, gamma):
    """tm(rho, s) = 2 rho^2 (s - h(rho))."""
    return 2.0 * rho * rho * (s - enthalpy(rho, gamma))


def _d_momentum_sq(rho, s, gamma):
    # d/drho tm = 4 rho (s - (gamma+1)/2 h(rho)); negative on the subsonic branch
    return 4.0 * rho * (s - 0.5 * (gamma + 1.0) * enthalpy(rho, gamma))


def rho_subsonic(t, s, gamma, tol=1e-13, max_iter=100):
    """Subsonic-branch density: the root rho in (rho_c, rho_m] of tm(rho, s) = t.

    Newton from rho_m (tm is concave and decreasing on the branch, so the
    iterates decrease monotonically to the root), safeguarded by bisection.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    t, s = np.broadcast_arrays(t, s)
    rho_c, rho_m, t_c = critical_quantities(s, gamma)
    if np.any(t < 0.0) or np.any(t >= t_c):
        raise SonicStateError("momentum must satisfy 0 <= t < tc(s) on the exact branch")

    lo = rho_c.copy()
    hi = rho_m.copy()
    x = rho_m.copy()
    ftol = tol * t_c
    for _ in range(max_iter):
        f = momentum_sq(x, s, gamma) - t
        done = np.abs(f) <= ftol
        if done.all():
            break
        lo = np.where(f > 0.0, np.maximum(lo, x), lo)
        hi = np.where(f < 0.0, np.minimum(hi, x), hi)
        df = _d_momentum_sq(x, s, gamma)
        step = np.where(df != 0.0, f / np.where(df != 0.0, df, 1.0), 0.0)
        xn = x - step
        bad = (xn <= lo) | (xn > hi) | ~np.isfinite(xn)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(done, x, xn)
    return x


def cutoff(u):
    """Smooth nonincreasing cutoff: 1 for u <= -1, 0 for u >= -1/2.

    C^2 quintic Hermite blend on [-1, -1/2].  Returns (value, d/du, d2/du2).
    """
    u = np.asarray(u, dtype=float)
    x = np.clip(2.0 * (u + 1.0), 0.0, 1.0)
    s = x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    ds = 30.0 * x * x * (x - 1.0) * (x - 1.0)
    d2s = 60.0 * x * (2.0 * x - 1.0) * (x - 1.0)
    return 1.0 - s, -2.0 * ds, -4.0 * d2s


@dataclass(frozen=True)
class FlowConstants:
    """Global scalar data of one flow problem."""

    gamma: float
    Q: float
    epsilon: float
    barH: float
    rho_bar: float
    kappa0: float
    B_star: float
    B_upper: float
    u_inf: float          # inf of ubar on [0, barH]
    u_sup_ext: float      # sup of the extended ubar on R
    Q_tilde: float        # subsonic-upstream flux threshold
    g_star: float         # lower bound 1/rho_m(B_upper)
    g_upper: float        # upper bound 1/rho_c(B_star)

    def validate(self):
        if not self.gamma > 1.0:
            raise DomainError("gamma must exceed 1")
        if not 0.0 < self.epsilon < 0.25:
            raise DomainError("epsilon must lie in (0, 1/4)")
        if not self.Q > 0.0:
            raise DomainError("Q must be positive")
        if not self.barH > 1.0:
            raise DomainError("barH must exceed 1")
        if self.Q > self.Q_tilde:
            if not (self.B_star <= self.B_upper <= 0.5 * (self.gamma + 1.0) * self.B_star * (1 + 1e-12)):
                raise DomainError("Bernoulli bounds not comparable despite Q > Q_tilde")

    @property
    def upstream_subsonic(self):
        return self.Q > self.Q_tilde


class UpstreamProfile:
    """Axial velocity ubar(y) on [0, barH] with its C^{1,1} extension to R.

    The extension is constant to the left of 0 and blends quadratically to a
    constant beyond barH (slope matched at barH, nonincreasing slope), which
    keeps the profile positive, nondecreasing and bounded.

    Profiles are supplied as analytic closures (u, du, d2u) or as samples
    interpolated monotonically (PCHIP); conditions on the second derivative
    are then checked on the interpolant.
    """

    def __init__(self, u, du, d2u, barH, ext_width=None):
        self.barH = float(barH)
        self._u = u
        self._du = du
        self._d2u = d2u
        self.ext_width = float(ext_width) if ext_width else 0.5 * self.barH
        self._uH = float(u(self.barH))
        self._duH = float(du(self.barH))
        self._u0 = float(u(0.0))
        self._u_right = self._uH + 0.5 * self._duH * self.ext_width
        # integral table: exact cumulative of s*u(s) on panels of [0, ymax]
        self._ymax = self.barH + self.ext_width
        n_pan = 4096
        edges = np.linspace(0.0, self._ymax, n_pan + 1)
        mid = edges[:-1, None] + np.diff(edges)[:, None] * _GL_X[None, :]
        vals = mid * self.u(mid)
        panel = vals @ _GL_W * np.diff(edges)
        self._int_edges = edges
        self._int_cum = np.concatenate([[0.0], np.cumsum(panel)])

    @classmethod
    def constant(cls, value, barH):
        v = float(value)
        return cls(lambda y: np.full_like(np.asarray(y, dtype=float), v),
                   lambda y: np.zeros_like(np.asarray(y, dtype=float)),
                   lambda y: np.zeros_like(np.asarray(y, dtype=float)),
                   barH)

    @classmethod
    def polynomial(cls, coeffs, barH):
        p = np.polynomial.Polynomial(coeffs)
        return cls(p, p.deriv(1), p.deriv(2), barH)

    @classmethod
    def from_samples(cls, y, u, ext_width=None):
        y = np.asarray(y, dtype=float)
        u = np.asarray(u, dtype=float)
        if y.ndim != 1 or y.size < 4 or np.any(np.diff(y) <= 0.0):
            raise InvalidProfileError("samples need a strictly increasing y grid")
        if y[0] != 0.0:
            raise InvalidProfileError("sample grid must start at y = 0")
        spl = interpolate.PchipInterpolator(y, u)
        return cls(spl, spl.derivative(1), spl.derivative(2), y[-1], ext_width)

    # -- extended evaluators -------------------------------------------------

    def u(self, y):
        y = np.asarray(y, dtype=float)
        w = self.ext_width
        yl = np.clip(y, 0.0, self.barH)
        core = np.asarray(self._u(yl), dtype=float)
        d = np.clip(y - self.barH, 0.0, w)
        right = self._uH + self._duH * (d - 0.5 * d * d / w)
        return np.where(y <= self.barH, core, np.where(y <= self.barH + w, right, self._u_right))

    def du(self, y):
        y = np.asarray(y, dtype=float)
        w = self.ext_width
        yl = np.clip(y, 0.0, self.barH)
        core = np.asarray(self._du(yl), dtype=float)
        core = np.where(y < 0.0, 0.0, core)
        d = y - self.barH
        right = self._duH * (1.0 - d / w)
        out = np.where(y <= self.barH, core, np.where(y <= self.barH + w, right, 0.0))
        return out

    def d2u(self, y):
        y = np.asarray(y, dtype=float)
        w = self.ext_width
        yl = np.clip(y, 0.0, self.barH)
        core = np.asarray(self._d2u(yl), dtype=float)
        core = np.where(y < 0.0, 0.0, core)
        return np.where(y <= self.barH, core, np.where(y <= self.barH + w, -self._duH / w, 0.0))

    def curvature_q(self, y):
        """(1/y) d/dy (du/y) = (d2u - du/y) / y^2, the profile curvature quantity."""
        y = np.maximum(np.asarray(y, dtype=float), 1e-8)
        return (self.d2u(y) - self.du(y) / y) / (y * y)

    # -- integral of s*u(s) --------------------------------------------------

    def flux_integral(self, y):
        """I(y) = int_0^y s*u(s) ds, machine accurate, vectorized."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y).astype(float)
        out = np.empty_like(y)
        hi = y > self._ymax
        yc = np.minimum(y, self._ymax)
        edges = self._int_edges
        dy = edges[1] - edges[0]
        k = np.clip((yc / dy).astype(int), 0, edges.size - 2)
        y0 = edges[k]
        loc = (yc - y0)[:, None] * _GL_X[None, :] + y0[:, None]
        out[:] = self._int_cum[k] + ((loc * self.u(loc)) @ _GL_W) * (yc - y0)
        # beyond the extension the profile is constant: closed form
        out[hi] += 0.5 * self._u_right * (y[hi] ** 2 - self._ymax ** 2)
        return out[0] if scalar else out

    def flux_integral_quad(self, y):
        """Adaptive-quadrature reference for I(y) (independent oracle path)."""
        val, _ = integrate.quad(lambda s: s * float(self.u(s)), 0.0, float(y),
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    # -- admissibility -------------------------------------------------------

    def validate(self, n_check=512, tol=1e-6):
        ys = np.linspace(0.0, self.barH, n_check + 1)
        uv = self.u(ys)
        if np.min(uv) <= 0.0:
            raise InvalidProfileError("ubar must be strictly positive on [0, barH]")
        y1 = ys[1]
        if abs(float(self.du(y1)) / y1) > max(tol, 10.0 * y1):
            raise InvalidProfileError("ubar'(y)/y must vanish as y -> 0")
        q = self.curvature_q(ys[1:])
        if np.min(q) < -1e-8 or not np.all(np.isfinite(q)):
            raise InvalidProfileError("(1/y)(ubar'/y)' must be finite and nonnegative")
        return True

    def kappa0(self, n_check=2048):
        ys = np.linspace(1e-6, self.barH, n_check)
        return float(np.max(np.abs(self.d2u(ys))) + np.max(np.abs(self.curvature_q(ys))))


def upstream_density(profile, Q):
    """rho_bar = Q / int_0^barH y ubar(y) dy by adaptive quadrature (rel <= 1e-10)."""
    if Q <= 0.0:
        raise DomainError("Q must be positive")
    denom, err = integrate.quad(lambda s: s * float(profile.u(s)), 0.0, profile.barH,
                                epsabs=0.0, epsrel=1e-12, limit=200)
    if not np.isfinite(denom) or denom <= 0.0:
        raise InvalidProfileError("profile momentum integral is not positive")
    if err > 1e-10 * abs(denom):
        raise InvalidProfileError("quadrature failed to reach relative 1e-10")
    return Q / denom


def streamline_height(psi, rho_bar, profile, clamped=False):
    """Height hbar solving psi = rho_bar * int_0^hbar y ubar(y) dy.

    Monotone in psi with hbar(0) = 0; root located to 1e-12 in hbar.  With
    ``clamped`` the R-extension is used (psi below 0 clamps to 0).
    """
    psi = float(psi)
    Q_ext = rho_bar * profile.flux_integral(profile._ymax)
    if not clamped and not 0.0 <= psi <= Q_ext:
        raise DomainError("psi outside the admissible stream-value range")
    psi = max(psi, 0.0)
    if psi == 0.0:
        return 0.0
    ymax = profile._ymax
    if psi >= Q_ext:
        # constant-velocity closed form beyond the extension
        return float(np.sqrt(ymax ** 2 + 2.0 * (psi - Q_ext) / (rho_bar * profile._u_right)))
    f = lambda y: rho_bar * profile.flux_integral(y) - psi
    return float(optimize.brentq(f, 0.0, ymax, xtol=1e-13, rtol=8.9e-16))


class BernoulliFn:
    """Bernoulli function B(z) = ubar(hbar(z))^2/2 + h(rho_bar) and derivatives.

    Extended to all of R: flat for z <= 0 and through the nondecreasing
    profile extension for z >= Q.  The streamline-height map is inverted by a
    quadratically convergent Newton iteration in hbar^2 (the map is exactly
    quadratic near the axis, so this variable removes the degenerate root).
    """

    def __init__(self, profile, Q, gamma):
        self.profile = profile
        self.Q = float(Q)
        self.gamma = float(gamma)
        self.rho_bar = upstream_density(profile, Q)
        self.h_rho_bar = enthalpy(self.rho_bar, gamma)
        # monotone lookup table for the Newton initial iterate
        ys = np.linspace(0.0, profile._ymax, 2049)
        self._tab_y2 = ys ** 2
        self._tab_psi = self.rho_bar * profile.flux_integral(ys)
        self.z_max = float(self._tab_psi[-1])

    def hbar(self, z):
        """Streamline height for z >= 0 (vectorized); exact quadratic variable Newton."""
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, 0.0, None)
        scalar = zc.ndim == 0
        zc = np.atleast_1d(zc)
        out = np.empty_like(zc)
        hi = zc >= self.z_max
        out[hi] = np.sqrt(self.profile._ymax ** 2
                          + 2.0 * (zc[hi] - self.z_max) / (self.rho_bar * self.profile._u_right))
        lo = ~hi
        if np.any(lo):
            zl = zc[lo]
            sig = np.interp(zl, self._tab_psi, self._tab_y2)
            for _ in range(60):
                y = np.sqrt(sig)
                f = self.rho_bar * self.profile.flux_integral(y) - zl
                df = 0.5 * self.rho_bar * self.profile.u(y)  # d psi / d sigma
                step = f / df
                sig = np.maximum(sig - step, 0.0)
                if np.max(np.abs(step)) < 1e-15 * max(1.0, float(np.max(sig))):
                    break
            out[lo] = np.sqrt(sig)
        return float(out[0]) if scalar else out

    def value(self, z):
        z = np.asarray(z, dtype=float)
        hb = self.hbar(np.maximum(z, 0.0))
        return 0.5 * self.profile.u(hb) ** 2 + self.h_rho_bar

    def deriv(self, z):
        z = np.asarray(z, dtype=float)
        hb = np.asarray(self.hbar(np.maximum(z, 0.0)), dtype=float)
        safe = np.maximum(hb, 1e-300)
        d = self.profile.du(hb) / (self.rho_bar * safe)
        return np.where((z <= 0.0) | (hb < 1e-12), 0.0, d)

    def deriv2(self, z):
        z = np.asarray(z, dtype=float)
        hb = np.asarray(self.hbar(np.maximum(z, 0.0)), dtype=float)
        q = self.profile.curvature_q(hb)
        u = self.profile.u(hb)
        return np.where(z <= 0.0, 0.0, q / (self.rho_bar ** 2 * u))

    def __call__(self, z):
        return self.value(z), self.deriv(z), self.deriv2(z)


class FlowTables:
    """Evaluators for g, its subsonic truncation and the functional integrands.

    ``g(t, z)`` is the reciprocal density on the subsonic branch; ``g_eps`` is
    its smooth truncation, frozen at the ceiling value g_upper once the
    momentum passes (1 - eps/2) of the sonic threshold.  ``G_eps`` integrates
    g_eps/2 in t (closed form on the untruncated branch, fixed Gauss-Legendre
    panel across the blend) and carries the z-only offset that normalizes
    G_eps(0, Q) = 0.
    """

    def __init__(self, bern, constants):
        self.bern = bern
        self.c = constants
        self.gamma = constants.gamma
        self.epsilon = constants.epsilon
        self.g_upper = constants.g_upper
        self._cg = (self.gamma + 1.0) / (self.gamma * (self.gamma - 1.0))
        _, rm_Q, _ = critical_quantities(bern.value(constants.Q), self.gamma)
        self._A_ref = rm_Q ** self.gamma

    # -- exact branch --------------------------------------------------------

    def g(self, t, z):
        """(g, dt_g, dz_g) on the exact subsonic branch 0 <= t < tc(B(z))."""
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        B = self.bern.value(z)
        dB = self.bern.deriv(z)
        rho = rho_subsonic(t, B, self.gamma)
        g = 1.0 / rho
        # d/drho tm < 0 strictly on (rho_c, rho_m], so this never divides by zero
        dtm = _d_momentum_sq(rho, B, self.gamma)
        dtg = -g * g / dtm
        dzg = 2.0 * dB / dtm
        return g, dtg, dzg

    def sonic_momentum(self, z):
        """tc(B(z))."""
        _, _, t_c = critical_quantities(self.bern.value(z), self.gamma)
        return t_c

    # -- truncated branch ----------------------------------------------------

    def g_eps(self, t, z):
        """(g_eps, dt_g_eps, dz_g_eps), total on [0, inf) x R."""
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        t, z = np.broadcast_arrays(t, z)
        scalar = t.ndim == 0
        t = np.atleast_1d(t).astype(float)
        z = np.atleast_1d(z).astype(float)
        B = np.atleast_1d(self.bern.value(z))
        dB = np.atleast_1d(self.bern.deriv(z))
        rho_c, rho_m, t_c = critical_quantities(B, self.gamma)
        r = t / t_c
        ge = np.full(t.shape, self.g_upper)
        dtg_e = np.zeros(t.shape)
        dzg_e = np.zeros(t.shape)
        live = r < 1.0 - 0.5 * self.epsilon
        if np.any(live):
            tl, Bl, dBl = t[live], B[live], dB[live]
            tcl = t_c[live]
            rho = rho_subsonic(tl, Bl, self.gamma)
            g = 1.0 / rho
            dtm = _d_momentum_sq(rho, Bl, self.gamma)
            dtg = -g * g / dtm
            dzg = 2.0 * dBl / dtm
            w, dw, _ = cutoff((tl / tcl - 1.0) / self.epsilon)
            dtc = 2.0 * rho_c[live] ** 2  # tc'(s)
            dw_dt = dw / (self.epsilon * tcl)
            dw_dz = -dw * tl * dtc * dBl / (self.epsilon * tcl * tcl)
            ge[live] = g * w + (1.0 - w) * self.g_upper
            dtg_e[live] = dtg * w + (g - self.g_upper) * dw_dt
            dzg_e[live] = dzg * w + (g - self.g_upper) * dw_dz
        if scalar:
            return float(ge[0]), float(dtg_e[0]), float(dzg_e[0])
        return ge, dtg_e, dzg_e

    # -- energy integrands ---------------------------------------------------

    def _closed_half_int(self, rho, B, rho_m):
        """(1/2) int_0^t g ds expressed through rho = rho(t): exact antiderivative."""
        return 2.0 * B * (rho - rho_m) - self._cg * (rho ** self.gamma - rho_m ** self.gamma)

    def _A_offset(self, rho_m):
        return (rho_m ** self.gamma - self._A_ref) / self.gamma

    def energy_density(self, t, z):
        """(G_eps, dz_G_eps, Phi_eps) at (t, z); Phi_eps = -G_eps + t*g_eps."""
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        t, z = np.broadcast_arrays(t, z)
        scalar = t.ndim == 0
        t = np.atleast_1d(t).astype(float)
        z = np.atleast_1d(z).astype(float)
        B = np.atleast_1d(self.bern.value(z))
        dB = np.atleast_1d(self.bern.deriv(z))
        rho_c, rho_m, t_c = critical_quantities(B, self.gamma)
        a = (1.0 - self.epsilon) * t_c
        b = (1.0 - 0.5 * self.epsilon) * t_c
        G = np.empty(t.shape)
        dzG = np.empty(t.shape)
        A = self._A_offset(rho_m)

        low = t <= a
        if np.any(low):
            rho = rho_subsonic(t[low], B[low], self.gamma)
            G[low] = A[low] + self._closed_half_int(rho, B[low], rho_m[low])
            dzG[low] = dB[low] * rho
        mid = ~low
        if np.any(mid):
            tm_, zm_, Bm_, dBm_ = t[mid], z[mid], B[mid], dB[mid]
            am, bm = a[mid], b[mid]
            rho_a = rho_subsonic(am, Bm_, self.gamma)
            base = A[mid] + self._closed_half_int(rho_a, Bm_, rho_m[mid])
            upper = np.minimum(tm_, bm)
            lenb = upper - am
            # fixed-panel quadrature of g_eps and dz_g_eps across the blend
            s_nodes = am[:, None] + lenb[:, None] * _GL_X[None, :]
            ge_n, _, dzge_n = self.g_eps(s_nodes, np.broadcast_to(zm_[:, None], s_nodes.shape))
            half_int = 0.5 * (ge_n @ _GL_W) * lenb
            half_intz = 0.5 * (dzge_n @ _GL_W) * lenb
            G[mid] = base + half_int + 0.5 * self.g_upper * np.maximum(tm_ - bm, 0.0)
            dzG[mid] = dBm_ * rho_a + half_intz
        ge, _, _ = self.g_eps(t, z)
        Phi = -G + t * np.atleast_1d(ge)
        if scalar:
            return float(G[0]), float(dzG[0]), float(Phi[0])
        return G, dzG, Phi

    def G_eps(self, t, z):
        return self.energy_density(t, z)[0]

    def dzG_eps(self, t, z):
        return self.energy_density(t, z)[1]

    def Phi_eps(self, t, z):
        return self.energy_density(t, z)[2]

    def lambda_eps(self, Lambda):
        """Penalty coefficient sqrt(Phi_eps(Lambda^2, Q)) for the free-boundary momentum."""
        Lambda = float(Lambda)
        if Lambda <= 0.0:
            raise DomainError("Lambda must be positive")
        t_c = float(self.sonic_momentum(self.c.Q))
        if Lambda * Lambda >= t_c:
            raise SonicFreeBoundaryError(
                "Lambda^2 = %.6g is not below the sonic momentum tc(B(Q)) = %.6g"
                % (Lambda * Lambda, t_c))
        return float(np.sqrt(self.Phi_eps(Lambda * Lambda, self.c.Q)))

    def lambda_eps_truncated(self, Lambda):
        """Penalty coefficient without the subsonic feasibility gate.

        The truncated functional is defined for every momentum; the fit
        machinery uses this variant so the bisection may roam the whole
        bracket even when the exact branch would be sonic.
        """
        Lambda = float(Lambda)
        if Lambda <= 0.0:
            raise DomainError("Lambda must be positive")
        return float(np.sqrt(self.Phi_eps(Lambda * Lambda, self.c.Q)))


@dataclass(frozen=True)
class GasModel:
    """Bundle of one problem's gas data: constants, profile, Bernoulli map, tables."""

    constants: FlowConstants
    profile: UpstreamProfile
    bernoulli: BernoulliFn
    tables: FlowTables


def make_gas_model(profile, Q, gamma, epsilon, validate=True):
    if validate:
        profile.validate()
    bern = BernoulliFn(profile, Q, gamma)
    rho_bar = bern.rho_bar
    u_inf = float(np.min(profile.u(np.linspace(0.0, profile.barH, 2048))))
    u_sup_ext = max(profile._u_right, float(np.max(profile.u(np.linspace(0.0, profile.barH, 2048)))))
    h_bar = enthalpy(rho_bar, gamma)
    B_star = 0.5 * u_inf ** 2 + h_bar
    B_upper = 0.5 * u_sup_ext ** 2 + h_bar
    I_H = profile.flux_integral(profile.barH)
    Q_tilde = u_sup_ext ** (2.0 / (gamma - 1.0)) * I_H
    _, rho_m_up, _ = critical_quantities(B_upper, gamma)
    rho_c_lo, _, _ = critical_quantities(B_star, gamma)
    constants = FlowConstants(
        gamma=float(gamma), Q=float(Q), epsilon=float(epsilon), barH=profile.barH,
        rho_bar=rho_bar, kappa0=profile.kappa0(), B_star=B_star, B_upper=B_upper,
        u_inf=u_inf, u_sup_ext=u_sup_ext, Q_tilde=Q_tilde,
        g_star=1.0 / rho_m_up, g_upper=1.0 / rho_c_lo)
    if validate:
        constants.validate()
    tables = FlowTables(bern, constants)
    return GasModel(constants, profile, bern, tables)
