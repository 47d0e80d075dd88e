# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cell kernels: fused energy/gradient/diagonal pass.

Scalar-loop twin of ``numpy_backend.energy_gradient``; the two must agree to
rounding (covered by the backend-agreement tests).  Sequential accumulation
gives a fixed summation order, so repeated runs are bitwise reproducible.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

# 16-point Gauss-Legendre nodes/weights on [0, 1] (match numpy backend)
_gl = np.polynomial.legendre.leggauss(16)
_GLX_ARR = 0.5 * (_gl[0] + 1.0)
_GLW_ARR = 0.5 * _gl[1]
cdef double[16] GLX
cdef double[16] GLW
for _k in range(16):
    GLX[_k] = _GLX_ARR[_k]
    GLW[_k] = _GLW_ARR[_k]


cdef inline double _hermite(double z, double z0, double dz,
                            const double* f, const double* fs, Py_ssize_t n) nogil:
    cdef double u = (z - z0) / dz
    if u < 0.0:
        u = 0.0
    if u > n - 1.0:
        u = n - 1.0
    cdef Py_ssize_t i = <Py_ssize_t>u
    if i > n - 2:
        i = n - 2
    cdef double s = u - i
    cdef double s2 = s * s
    cdef double s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * f[i] + (-2.0 * s3 + 3.0 * s2) * f[i + 1]
            + dz * ((s3 - 2.0 * s2 + s) * fs[i] + (s3 - s2) * fs[i + 1]))


cdef inline double _enth(double rho, double gamma) nogil:
    return pow(rho, gamma - 1.0) / (gamma - 1.0)


cdef inline double _rho_newton(double t, double B, double gamma, double rm) nogil:
    cdef double c0 = 2.0 * (gamma - 1.0) / (gamma + 1.0)
    cdef double rc = pow(c0 * B, 1.0 / (gamma - 1.0))
    cdef double lo = rc
    cdef double hi = rm
    cdef double x = rm
    cdef double ftol = 1e-14 * pow(rc, gamma + 1.0)
    cdef double f, df, xn
    cdef int it
    for it in range(80):
        f = 2.0 * x * x * (B - _enth(x, gamma)) - t
        if fabs(f) <= ftol:
            break
        if f > 0.0:
            if x > lo:
                lo = x
        elif f < 0.0:
            if x < hi:
                hi = x
        df = 4.0 * x * (B - 0.5 * (gamma + 1.0) * _enth(x, gamma))
        xn = x - f / df
        if xn <= lo or xn > hi or xn != xn:
            xn = 0.5 * (lo + hi)
        x = xn
    return x


def energy_gradient(double[::1] v, int[:, ::1] cells, double[::1] cell_y,
                    double wx, double[::1] cell_wy, double[::1] cell_area,
                    double[::1] cell_weight,
                    double gamma, double eps, double g_up, double cg, double Q,
                    double z0, double dz,
                    double[::1] B, double[::1] B_s, double[::1] dB, double[::1] dB_s,
                    double[::1] tc, double[::1] tc_s, double[::1] rm, double[::1] rm_s,
                    double[::1] A, double[::1] A_s,
                    double[::1] rho_a, double[::1] rho_a_s,
                    double[::1] T0, double[::1] T0_s, double[::1] T1, double[::1] T1_s,
                    double[::1] V, double[::1] V_s,
                    double lam2, double delta, int want_diag):
    cdef Py_ssize_t n_cells = cells.shape[0]
    cdef Py_ssize_t n_slots = v.shape[0]
    cdef Py_ssize_t n_tab = B.shape[0]
    grad_arr = np.zeros(n_slots)
    diag_arr = np.zeros(n_slots) if want_diag else None
    cdef double[::1] grad = grad_arr
    cdef double[::1] diag = grad_arr if not want_diag else diag_arr

    cdef double energy = 0.0
    cdef Py_ssize_t m, k
    cdef int ia, ib, ic, id_
    cdef double va, vb, vc, vd, zc, px, py, yc, yinv, t, wgt
    cdef double Bz, dBz, tcz, rmz, az, bz, Az, raz, T0z, T1z, Vz
    cdef double G, dzG, ge, dtg_e
    cdef double rho, g, dtm, dtg, dzg, u, xw, w, dwdu, dw_dt, dw_dz, dtc, rc2
    cdef double acc_g, acc_z, L, s_k, c0g
    cdef double xx, chi, dchi, d2chi
    cdef double base_z, gy, gpx, gpy, lap, curv, pen, q0
    cdef double gl_cache_g, gl_cache_z

    c0g = 2.0 * (gamma - 1.0) / (gamma + 1.0)

    for m in range(n_cells):
        wgt = cell_weight[m] * cell_area[m]
        if wgt == 0.0:
            continue
        ia = cells[m, 0]; ib = cells[m, 1]; ic = cells[m, 2]; id_ = cells[m, 3]
        va = v[ia]; vb = v[ib]; vc = v[ic]; vd = v[id_]
        zc = 0.25 * (va + vb + vc + vd)
        px = wx * (vb + vd - va - vc)
        py = cell_wy[m] * (vc + vd - va - vb)
        yc = cell_y[m]
        yinv = 1.0 / yc
        t = (px * px + py * py) * yinv * yinv

        Bz = _hermite(zc, z0, dz, &B[0], &B_s[0], n_tab)
        dBz = _hermite(zc, z0, dz, &dB[0], &dB_s[0], n_tab)
        tcz = _hermite(zc, z0, dz, &tc[0], &tc_s[0], n_tab)
        rmz = _hermite(zc, z0, dz, &rm[0], &rm_s[0], n_tab)
        az = (1.0 - eps) * tcz
        bz = (1.0 - 0.5 * eps) * tcz

        if t <= az:
            rho = _rho_newton(t, Bz, gamma, rmz)
            g = 1.0 / rho
            dtm = 4.0 * rho * (Bz - 0.5 * (gamma + 1.0) * _enth(rho, gamma))
            Az = _hermite(zc, z0, dz, &A[0], &A_s[0], n_tab)
            G = Az + 2.0 * Bz * (rho - rmz) - cg * (pow(rho, gamma) - pow(rmz, gamma))
            dzG = dBz * rho
            ge = g
            dtg_e = -g * g / dtm
        elif t < bz:
            raz = _hermite(zc, z0, dz, &rho_a[0], &rho_a_s[0], n_tab)
            T0z = _hermite(zc, z0, dz, &T0[0], &T0_s[0], n_tab)
            rc2 = pow(c0g * Bz, 2.0 / (gamma - 1.0))
            dtc = 2.0 * rc2 * dBz
            acc_g = 0.0
            acc_z = 0.0
            L = t - az
            for k in range(17):
                s_k = az + L * GLX[k] if k < 16 else t
                rho = _rho_newton(s_k, Bz, gamma, rmz)
                g = 1.0 / rho
                dtm = 4.0 * rho * (Bz - 0.5 * (gamma + 1.0) * _enth(rho, gamma))
                dtg = -g * g / dtm
                dzg = 2.0 * dBz / dtm
                u = (s_k / tcz - 1.0) / eps
                xx = 2.0 * (u + 1.0)
                if xx < 0.0:
                    xx = 0.0
                if xx > 1.0:
                    xx = 1.0
                w = 1.0 - xx * xx * xx * (10.0 + xx * (-15.0 + 6.0 * xx))
                dwdu = -60.0 * xx * xx * (xx - 1.0) * (xx - 1.0)
                dw_dt = dwdu / (eps * tcz)
                dw_dz = -dwdu * s_k * dtc * dBz / (eps * tcz * tcz)
                gl_cache_g = g * w + (1.0 - w) * g_up
                gl_cache_z = dzg * w + (g - g_up) * dw_dz
                if k < 16:
                    acc_g += GLW[k] * gl_cache_g
                    acc_z += GLW[k] * gl_cache_z
                else:
                    ge = gl_cache_g
                    dtg_e = dtg * w + (g - g_up) * dw_dt
            G = T0z + 0.5 * acc_g * L
            dzG = dBz * raz + 0.5 * acc_z * L
        else:
            T1z = _hermite(zc, z0, dz, &T1[0], &T1_s[0], n_tab)
            Vz = _hermite(zc, z0, dz, &V[0], &V_s[0], n_tab)
            raz = _hermite(zc, z0, dz, &rho_a[0], &rho_a_s[0], n_tab)
            G = T1z + 0.5 * g_up * (t - bz)
            dzG = dBz * raz + Vz
            ge = g_up
            dtg_e = 0.0

        # C^1 indicator ramp
        xx = (zc - (Q - delta)) / delta
        if xx <= 0.0:
            chi = 1.0; dchi = 0.0; d2chi = 0.0
        elif xx >= 1.0:
            chi = 0.0; dchi = 0.0; d2chi = 0.0
        else:
            chi = 1.0 - xx * xx * (3.0 - 2.0 * xx)
            dchi = -6.0 * xx * (1.0 - xx) / delta
            d2chi = (12.0 * xx - 6.0) / (delta * delta)

        energy += wgt * yc * (G + lam2 * chi)

        base_z = 0.25 * yc * (dzG + lam2 * dchi) * wgt
        gy = ge * yinv * wgt
        gpx = gy * px * wx
        gpy = gy * py * cell_wy[m]
        grad[ia] += -gpx - gpy + base_z
        grad[ib] += +gpx - gpy + base_z
        grad[ic] += -gpx + gpy + base_z
        grad[id_] += +gpx + gpy + base_z

        if want_diag:
            lap = ge * yinv * (wx * wx + cell_wy[m] * cell_wy[m]) * wgt
            curv = 2.0 * dtg_e * yinv * yinv * yinv * wgt
            # |chi''|: see numpy backend
            pen = yc * lam2 * fabs(d2chi) / 16.0 * wgt
            q0 = -px * wx - py * cell_wy[m]
            diag[ia] += lap + curv * q0 * q0 + pen
            q0 = px * wx - py * cell_wy[m]
            diag[ib] += lap + curv * q0 * q0 + pen
            q0 = -px * wx + py * cell_wy[m]
            diag[ic] += lap + curv * q0 * q0 + pen
            q0 = px * wx + py * cell_wy[m]
            diag[id_] += lap + curv * q0 * q0 + pen

    return energy, grad_arr, diag_arr
