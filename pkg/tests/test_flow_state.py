"""Pointwise gas algebra: worked examples, oracles, branch identities."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from jetfb import flow_state as fs
from jetfb.errors import DomainError, SonicFreeBoundaryError, SonicStateError


@pytest.fixture(scope="module")
def const_gas():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    return fs.make_gas_model(prof, 4.0, 2.0, 0.1)


@pytest.fixture(scope="module")
def quartic_gas():
    prof = fs.UpstreamProfile.polynomial([1, 0, 0, 0, 1], 2.0)
    return fs.make_gas_model(prof, 38.0 / 3.0, 2.0, 0.1)


# -- upstream density ---------------------------------------------------------

def test_upstream_density_constant_profile():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    assert fs.upstream_density(prof, 4.0) == pytest.approx(2.0, rel=1e-12)


def test_upstream_density_quartic():
    # int_0^2 y (1 + y^4) dy = 2 + 32/3 = 38/3
    prof = fs.UpstreamProfile.polynomial([1, 0, 0, 0, 1], 2.0)
    assert fs.upstream_density(prof, 38.0 / 3.0) == pytest.approx(1.0, rel=1e-10)


def test_upstream_density_linearity():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    r1 = fs.upstream_density(prof, 3.0)
    r2 = fs.upstream_density(prof, 6.0)
    assert r2 == pytest.approx(2.0 * r1, rel=1e-13)


def test_upstream_density_rejects_nonpositive_flux():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    with pytest.raises(DomainError):
        fs.upstream_density(prof, -1.0)


# -- streamline height --------------------------------------------------------

def test_streamline_height_constant():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    assert fs.streamline_height(1.0, 2.0, prof) == pytest.approx(1.0, abs=1e-12)
    assert fs.streamline_height(4.0, 2.0, prof) == pytest.approx(2.0, abs=1e-12)


def test_streamline_height_quartic_forward_check():
    prof = fs.UpstreamProfile.polynomial([1, 0, 0, 0, 1], 2.0)
    h = fs.streamline_height(38.0 / 3.0, 1.0, prof)
    assert h == pytest.approx(2.0, abs=1e-11)


def test_streamline_height_domain_error():
    prof = fs.UpstreamProfile.constant(1.0, 2.0)
    with pytest.raises(DomainError):
        fs.streamline_height(-0.5, 2.0, prof)
    assert fs.streamline_height(-0.5, 2.0, prof, clamped=True) == 0.0


def test_streamline_height_monotone():
    prof = fs.UpstreamProfile.polynomial([1, 0, 0, 0, 1], 2.0)
    psis = np.linspace(0.0, 38.0 / 3.0, 17)
    hs = [fs.streamline_height(p, 1.0, prof) for p in psis]
    assert np.all(np.diff(hs) > 0.0)


# -- Bernoulli function -------------------------------------------------------

def test_bernoulli_constant_profile(const_gas):
    b = const_gas.bernoulli
    z = np.array([-1.0, 0.0, 1.3, 4.0, 5.0])
    B, dB, d2B = b(z)
    assert np.allclose(B, 2.5, atol=1e-12)
    assert np.allclose(dB, 0.0)
    assert np.allclose(d2B, 0.0)


def test_bernoulli_quartic_value(quartic_gas):
    # z with hbar(z) = 1: B = (1 + 1)^2/2 + h(1) = 3 at gamma = 2
    prof = quartic_gas.profile
    z1 = quartic_gas.bernoulli.rho_bar * prof.flux_integral(1.0)
    assert float(quartic_gas.bernoulli.value(z1)) == pytest.approx(3.0, rel=1e-10)


def test_bernoulli_flat_left_extension(quartic_gas):
    for z in (-2.0, -0.3, 0.0):
        assert float(quartic_gas.bernoulli.deriv(z)) == 0.0


def test_bernoulli_bounds_and_derivative_bounds(quartic_gas):
    c = quartic_gas.constants
    z = np.linspace(1e-6, c.Q, 400)
    B, dB, d2B = quartic_gas.bernoulli(z)
    assert np.all(B >= c.B_star - 1e-12) and np.all(B <= c.B_upper + 1e-12)
    assert np.all(dB >= -1e-14)
    assert np.all(dB <= c.kappa0 / c.rho_bar + 1e-10)
    assert np.all(d2B >= -1e-12)
    assert np.all(d2B <= c.kappa0 / (c.rho_bar ** 2 * c.u_inf) + 1e-10)


def test_bernoulli_nondecreasing_beyond_Q(quartic_gas):
    z = np.linspace(quartic_gas.constants.Q, 2.0 * quartic_gas.constants.Q, 50)
    assert np.all(np.asarray(quartic_gas.bernoulli.deriv(z)) >= -1e-14)


# -- critical quantities ------------------------------------------------------

def test_critical_quantities_examples():
    rc, rm, tc = fs.critical_quantities(1.0, 2.0)
    assert rc == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert rm == pytest.approx(1.0, rel=1e-14)
    assert tc == pytest.approx((2.0 / 3.0) ** 3, rel=1e-14)
    rc, rm, _ = fs.critical_quantities(2.5, 2.0)
    assert rc == pytest.approx(5.0 / 3.0, rel=1e-14)
    assert rm == pytest.approx(2.5, rel=1e-14)


def test_critical_momentum_consistency():
    rng = np.random.default_rng(0)
    for gamma in (1.4, 2.0, 2.5):
        s = rng.uniform(0.5, 5.0, 20)
        rc, _, tc = fs.critical_quantities(s, gamma)
        assert np.allclose(fs.momentum_sq(rc, s, gamma), tc, rtol=1e-12)


def test_critical_quantities_domain_error():
    with pytest.raises(DomainError):
        fs.critical_quantities(-1.0, 2.0)


# -- density inversion --------------------------------------------------------

def test_density_from_momentum_endpoints():
    assert fs.rho_subsonic(0.0, 1.0, 2.0) == pytest.approx(1.0, abs=1e-13)
    rc, _, tc = fs.critical_quantities(1.0, 2.0)
    rho = fs.rho_subsonic(tc * (1.0 - 1e-10), 1.0, 2.0)
    assert rho == pytest.approx(rc, rel=1e-4)


def test_density_from_momentum_bisection_value():
    # 2 rho^2 (1 - rho) = 0.2 on (2/3, 1]
    rho = fs.rho_subsonic(0.2, 1.0, 2.0)
    oracle = brentq(lambda r: 2 * r * r * (1 - r) - 0.2, 2.0 / 3.0 + 1e-14, 1.0,
                    xtol=1e-15)
    assert rho == pytest.approx(oracle, abs=1e-12)
    assert rho == pytest.approx(0.8670, abs=5e-5)


def test_density_from_momentum_oracle_sample():
    rng = np.random.default_rng(42)
    gamma = 2.0
    s = rng.uniform(0.5, 4.0, 300)
    rc, rm, tc = fs.critical_quantities(s, gamma)
    t = rng.uniform(0.0, 0.999, 300) * tc
    rho = fs.rho_subsonic(t, s, gamma)
    for k in range(0, 300, 7):
        oracle = brentq(lambda r: fs.momentum_sq(r, s[k], gamma) - t[k],
                        rc[k] * (1 + 1e-14), rm[k], xtol=1e-15)
        assert abs(rho[k] - oracle) <= 1e-10 * max(1.0, oracle)


def test_density_sonic_error(const_gas):
    with pytest.raises(SonicStateError):
        const_gas.tables.g(10.0, 2.0)


# -- truncation ---------------------------------------------------------------

def test_cutoff_support_and_smoothness():
    u = np.linspace(-2.0, 1.0, 6001)
    w, dw, d2w = fs.cutoff(u)
    assert np.all(w[u <= -1.0] == 1.0)
    assert np.all(w[u >= -0.5] == 0.0)
    assert np.all(np.diff(w) <= 1e-15)
    # C^1 check by finite differences
    du = u[1] - u[0]
    fd = np.gradient(w, du)
    assert np.max(np.abs(fd - dw)) < 5e-4


def test_truncated_g_equals_g_below_cut(const_gas):
    tab = const_gas.tables
    z = 2.0
    tc = float(tab.sonic_momentum(z))
    t = np.linspace(0.0, (1.0 - tab.epsilon) * tc, 40)
    g, dtg, dzg = tab.g(t, np.full_like(t, z))
    ge, dtge, dzge = tab.g_eps(t, np.full_like(t, z))
    assert np.array_equal(g, ge)
    assert np.array_equal(dtg, dtge)
    assert np.array_equal(dzg, dzge)


def test_truncated_g_frozen_above_cut(const_gas):
    tab = const_gas.tables
    z = 3.1
    tc = float(tab.sonic_momentum(z))
    t = np.linspace((1.0 - 0.5 * tab.epsilon) * tc, 3.0 * tc, 25)
    ge, dtge, dzge = tab.g_eps(t, np.full_like(t, z))
    assert np.all(ge == const_gas.constants.g_upper)
    assert np.all(dtge == 0.0)
    assert np.all(dzge == 0.0)


def test_truncated_partials_finite_differences(quartic_gas):
    tab = quartic_gas.tables
    rng = np.random.default_rng(3)
    z = rng.uniform(0.5, 11.0, 30)
    tc = tab.sonic_momentum(z)
    t = (1.0 - 0.7 * tab.epsilon) * tc
    _, dtge, dzge = tab.g_eps(t, z)
    eps_t = 1e-6 * tc
    gp, _, _ = tab.g_eps(t + eps_t, z)
    gm, _, _ = tab.g_eps(t - eps_t, z)
    fd_t = (gp - gm) / (2 * eps_t)
    assert np.max(np.abs(fd_t - dtge) / np.abs(dtge)) < 1e-6
    eps_z = 1e-6 * quartic_gas.constants.Q
    gp, _, _ = tab.g_eps(t, z + eps_z)
    gm, _, _ = tab.g_eps(t, z - eps_z)
    fd_z = (gp - gm) / (2 * eps_z)
    scale = np.maximum(np.abs(dzge), 1e-8)
    assert np.max(np.abs(fd_z - dzge) / scale) < 2e-5


def test_truncation_bounds_lemma(quartic_gas):
    tab = quartic_gas.tables
    c = quartic_gas.constants
    rng = np.random.default_rng(7)
    z = rng.uniform(-0.5 * c.Q, 1.5 * c.Q, 10000)
    tc = tab.sonic_momentum(z)
    t = rng.uniform(0.0, 2.0, 10000) * tc
    ge, dtge, dzge = tab.g_eps(t, z)
    assert np.all(ge >= c.g_star * (1 - 1e-12))
    assert np.all(ge <= c.g_upper * (1 + 1e-12))
    assert np.all(ge + 2.0 * t * dtge > 0.0)
    assert np.all(np.isfinite(dzge))


def test_effective_truncation_constants(quartic_gas):
    # c_*, c^* of the bounds are existential; measure and sanity-check them
    tab = quartic_gas.tables
    c = quartic_gas.constants
    rng = np.random.default_rng(11)
    z = rng.uniform(-0.5 * c.Q, 1.5 * c.Q, 4000)
    t = rng.uniform(0.0, 2.0, 4000) * tab.sonic_momentum(z)
    ge, _, _ = tab.g_eps(t, z)
    scale = c.B_star ** (1.0 / (c.gamma - 1.0))
    c_lo = float(np.min(ge) * scale)
    c_hi = float(np.max(ge) * scale)
    assert 0.0 < c_lo <= c_hi < 10.0


# -- branch identity and roundtrip --------------------------------------------

def test_branch_identity_rotational(quartic_gas):
    tab = quartic_gas.tables
    rng = np.random.default_rng(19)
    z = rng.uniform(0.05, 12.5, 200)
    tc = tab.sonic_momentum(z)
    t = rng.uniform(0.0, 0.85, 200) * tc
    g, dtg, dzg = tab.g(t, z)
    dB = quartic_gas.bernoulli.deriv(z)
    ident = g * g * dzg + 2.0 * dB * dtg
    assert np.max(np.abs(ident)) < 1e-8


def test_inversion_roundtrip(quartic_gas):
    tab = quartic_gas.tables
    rng = np.random.default_rng(23)
    z = rng.uniform(0.05, 12.5, 200)
    tc = tab.sonic_momentum(z)
    t = rng.uniform(1e-6, 0.95, 200) * tc
    g, _, _ = tab.g(t, z)
    B = quartic_gas.bernoulli.value(z)
    t_back = fs.momentum_sq(1.0 / g, B, 2.0)
    assert np.max(np.abs(t_back - t) / t) < 1e-10


def test_exact_partials_finite_differences(quartic_gas):
    tab = quartic_gas.tables
    rng = np.random.default_rng(29)
    z = rng.uniform(0.5, 11.0, 40)
    tc = tab.sonic_momentum(z)
    t = rng.uniform(0.05, 0.8, 40) * tc
    g, dtg, dzg = tab.g(t, z)
    et = 1e-6 * tc
    fd_t = (tab.g(t + et, z)[0] - tab.g(t - et, z)[0]) / (2 * et)
    assert np.max(np.abs(fd_t - dtg) / dtg) < 1e-6
    ez = 1e-6
    fd_z = (tab.g(t, z + ez)[0] - tab.g(t, z - ez)[0]) / (2 * ez)
    scale = np.maximum(np.abs(dzg), 1e-8)
    assert np.max(np.abs(fd_z - dzg) / scale) < 2e-5


# -- energy density and penalty coefficient -----------------------------------

def test_energy_density_normalization(const_gas):
    G, dzG, Phi = const_gas.tables.energy_density(0.0, 4.0)
    assert G == pytest.approx(0.0, abs=1e-14)
    assert Phi == pytest.approx(0.0, abs=1e-14)


def test_energy_density_irrotational_z_independent(const_gas):
    tab = const_gas.tables
    t = np.full(5, 0.7)
    z = np.linspace(0.3, 3.9, 5)
    G, dzG, _ = tab.energy_density(t, z)
    assert np.allclose(dzG, 0.0, atol=1e-14)
    assert np.allclose(G, G[0], atol=1e-12)


def test_energy_density_quadrature_oracle(quartic_gas):
    tab = quartic_gas.tables
    rm_Q = fs.critical_quantities(quartic_gas.bernoulli.value(quartic_gas.constants.Q), 2.0)[1]
    for (t0, z0) in [(0.5, 2.0), (3.0, 7.7), (40.0, 11.0)]:
        rm_z = fs.critical_quantities(quartic_gas.bernoulli.value(z0), 2.0)[1]
        A = (rm_z ** 2 - rm_Q ** 2) / 2.0
        oracle = 0.5 * quad(lambda s: tab.g_eps(s, z0)[0], 0.0, t0,
                            epsabs=0.0, epsrel=1e-12, limit=300)[0] + A
        assert tab.G_eps(t0, z0) == pytest.approx(oracle, rel=1e-10)


def test_dz_G_closed_form_untruncated(quartic_gas):
    # dzG = B'(z)/g(t,z) on the untruncated branch
    tab = quartic_gas.tables
    z = np.linspace(0.5, 11.0, 9)
    t = 0.5 * tab.sonic_momentum(z)
    g, _, _ = tab.g(t, z)
    dB = quartic_gas.bernoulli.deriv(z)
    _, dzG, _ = tab.energy_density(t, z)
    assert np.allclose(dzG, dB / g, rtol=1e-10)


def test_phi_monotone_lattice(quartic_gas):
    tab = quartic_gas.tables
    z = np.linspace(-1.0, 14.0, 50)
    tcz = tab.sonic_momentum(z)
    frac = np.linspace(0.01, 1.8, 50)
    T, Z = np.meshgrid(frac, z)
    Tv = (T * tcz[:, None]).reshape(-1)
    Zv = np.broadcast_to(z[:, None], T.shape).reshape(-1)
    ge, dtge, _ = tab.g_eps(Tv, Zv)
    dPhi = 0.5 * ge + Tv * dtge
    assert np.all(dPhi > 0.0)


def test_lambda_eps_examples(const_gas):
    tab = const_gas.tables
    # canonical worked value: Phi(4, 4) = 1.125
    assert tab.lambda_eps(2.0) ** 2 == pytest.approx(1.125, rel=1e-10)
    # independent quadrature oracle
    rm_Q = 2.5
    oracle_G = 0.5 * quad(lambda s: tab.g_eps(s, 4.0)[0], 0.0, 4.0,
                          epsabs=0.0, epsrel=1e-12)[0]
    ge4, _, _ = tab.g_eps(4.0, 4.0)
    assert tab.lambda_eps(2.0) ** 2 == pytest.approx(-oracle_G + 4.0 * ge4, rel=1e-8)


def test_lambda_eps_small_limit(const_gas):
    assert const_gas.tables.lambda_eps(1e-6) < 1e-5


def test_lambda_eps_monotone(const_gas):
    lams = [const_gas.tables.lambda_eps(L) for L in (0.5, 1.0, 1.5, 2.0)]
    assert np.all(np.diff(lams) > 0.0)


def test_lambda_eps_sonic_gate(const_gas):
    with pytest.raises(SonicFreeBoundaryError):
        const_gas.tables.lambda_eps(3.0)  # 9 > tc = 4.63


def test_flow_constants_validation(const_gas):
    c = const_gas.constants
    c.validate()
    assert c.upstream_subsonic
    assert c.B_star <= c.B_upper <= 0.5 * (c.gamma + 1.0) * c.B_star + 1e-12


def test_profile_validation_rejects_bad():
    from jetfb.errors import InvalidProfileError
    bad = fs.UpstreamProfile.polynomial([1.0, -0.6], 2.0)  # decreasing
    with pytest.raises(InvalidProfileError):
        bad.validate()


def test_dzG_finite_differences(quartic_gas):
    tab = quartic_gas.tables
    rng = np.random.default_rng(31)
    z = rng.uniform(0.5, 11.0, 25)
    tc = tab.sonic_momentum(z)
    for frac in (0.5, 0.93, 1.3):
        t = frac * tc
        _, dzG, _ = tab.energy_density(t, z)
        ez = 1e-6
        Gp = tab.G_eps(t, z + ez)
        Gm = tab.G_eps(t, z - ez)
        fd = (Gp - Gm) / (2 * ez)
        scale = np.maximum(np.abs(dzG), 1e-6)
        assert np.max(np.abs(fd - dzG) / scale) < 1e-5
