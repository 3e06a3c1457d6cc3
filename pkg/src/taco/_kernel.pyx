# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping kernel: per-env 1 kHz inner loop (body-rate controller,
first-order motors, RK4 rigid body, exponential-map attitude, battery).

Arithmetic mirrors dynamics.py / _kernel_np.py; keep the three in sync.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fmax, fmin, isfinite


cdef inline void _deriv(
    double* p, double* v, double* r, double* w, double* m,
    double* steady,
    double mass, double* inertia, double* inertia_inv, double* drag,
    double kf, double kt, double km_t, double gravity,
    double* arms_x, double* arms_y, double* spin,
    double* dp, double* dv, double* dw, double* dm,
) nogil:
    cdef double m2[4]
    cdef double f[4]
    cdef double tau[3]
    cdef double vb[3]
    cdef double fb[3]
    cdef double jw[3]
    cdef double rhs[3]
    cdef int i
    cdef double mi, fsum

    for i in range(4):
        mi = m[i]
        if mi < 0.0:
            mi = 0.0
        m2[i] = mi * mi
        f[i] = kf * m2[i]
    fsum = f[0] + f[1] + f[2] + f[3]

    tau[0] = f[0] * arms_y[0] + f[1] * arms_y[1] + f[2] * arms_y[2] + f[3] * arms_y[3]
    tau[1] = -(f[0] * arms_x[0] + f[1] * arms_x[1] + f[2] * arms_x[2] + f[3] * arms_x[3])
    tau[2] = kt * (m2[0] * spin[0] + m2[1] * spin[1] + m2[2] * spin[2] + m2[3] * spin[3])

    # body velocity = R^T v
    for i in range(3):
        vb[i] = r[0 * 3 + i] * v[0] + r[1 * 3 + i] * v[1] + r[2 * 3 + i] * v[2]
    fb[0] = -drag[0] * vb[0]
    fb[1] = -drag[1] * vb[1]
    fb[2] = fsum - drag[2] * vb[2]
    for i in range(3):
        dv[i] = (r[i * 3 + 0] * fb[0] + r[i * 3 + 1] * fb[1] + r[i * 3 + 2] * fb[2]) / mass
    dv[2] -= gravity

    for i in range(3):
        jw[i] = inertia[i * 3 + 0] * w[0] + inertia[i * 3 + 1] * w[1] + inertia[i * 3 + 2] * w[2]
    rhs[0] = tau[0] - (w[1] * jw[2] - w[2] * jw[1])
    rhs[1] = tau[1] - (w[2] * jw[0] - w[0] * jw[2])
    rhs[2] = tau[2] - (w[0] * jw[1] - w[1] * jw[0])
    for i in range(3):
        dw[i] = (
            inertia_inv[i * 3 + 0] * rhs[0]
            + inertia_inv[i * 3 + 1] * rhs[1]
            + inertia_inv[i * 3 + 2] * rhs[2]
        )

    for i in range(3):
        dp[i] = v[i]
    for i in range(4):
        dm[i] = (steady[i] - m[i]) / km_t


cdef inline void _exp_update(double* r, double* w, double dt) nogil:
    """R <- orthonormalize(R @ exp(hat(w * dt)))."""
    cdef double wx = w[0] * dt, wy = w[1] * dt, wz = w[2] * dt
    cdef double angle = sqrt(wx * wx + wy * wy + wz * wz)
    cdef double e[9]
    cdef double out[9]
    cdef double k[9]
    cdef double kk[9]
    cdef double sa, ca, ax, ay, az
    cdef int i, j, l
    if angle < 1e-12:
        e[0] = 1.0; e[1] = -wz; e[2] = wy
        e[3] = wz; e[4] = 1.0; e[5] = -wx
        e[6] = -wy; e[7] = wx; e[8] = 1.0
    else:
        ax = wx / angle; ay = wy / angle; az = wz / angle
        k[0] = 0.0; k[1] = -az; k[2] = ay
        k[3] = az; k[4] = 0.0; k[5] = -ax
        k[6] = -ay; k[7] = ax; k[8] = 0.0
        for i in range(3):
            for j in range(3):
                kk[i * 3 + j] = (
                    k[i * 3 + 0] * k[0 * 3 + j]
                    + k[i * 3 + 1] * k[1 * 3 + j]
                    + k[i * 3 + 2] * k[2 * 3 + j]
                )
        sa = sin(angle)
        ca = 1.0 - cos(angle)
        for i in range(9):
            e[i] = sa * k[i] + ca * kk[i]
        e[0] += 1.0; e[4] += 1.0; e[8] += 1.0

    for i in range(3):
        for j in range(3):
            out[i * 3 + j] = (
                r[i * 3 + 0] * e[0 * 3 + j]
                + r[i * 3 + 1] * e[1 * 3 + j]
                + r[i * 3 + 2] * e[2 * 3 + j]
            )

    # Gram-Schmidt on columns
    cdef double c0[3]
    cdef double c1[3]
    cdef double c2[3]
    cdef double nrm, dot
    for i in range(3):
        c0[i] = out[i * 3 + 0]
    nrm = sqrt(c0[0] * c0[0] + c0[1] * c0[1] + c0[2] * c0[2])
    for i in range(3):
        c0[i] /= nrm
    dot = c0[0] * out[0 * 3 + 1] + c0[1] * out[1 * 3 + 1] + c0[2] * out[2 * 3 + 1]
    for i in range(3):
        c1[i] = out[i * 3 + 1] - dot * c0[i]
    nrm = sqrt(c1[0] * c1[0] + c1[1] * c1[1] + c1[2] * c1[2])
    for i in range(3):
        c1[i] /= nrm
    c2[0] = c0[1] * c1[2] - c0[2] * c1[1]
    c2[1] = c0[2] * c1[0] - c0[0] * c1[2]
    c2[2] = c0[0] * c1[1] - c0[1] * c1[0]
    for i in range(3):
        r[i * 3 + 0] = c0[i]
        r[i * 3 + 1] = c1[i]
        r[i * 3 + 2] = c2[i]


def step_envs(
    double[:, ::1] p, double[:, ::1] v, double[:, :, ::1] r, double[:, ::1] w,
    double[:, ::1] motor, double[::1] voltage, double[::1] t,
    double[:, ::1] actions,
    double[::1] mass, double[:, :, ::1] inertia, double[:, :, ::1] inertia_inv,
    double[:, ::1] drag, double[::1] k_force, double[::1] k_torque,
    double[::1] k_motor, double[::1] poly_a0, double[::1] poly_a1,
    double[::1] c_power, double[::1] capacity, double[::1] r_int,
    double[:, ::1] arms, double[::1] spin, double[:, ::1] alloc_inv,
    double[:, ::1] inertia_nom, double[::1] rate_gains,
    double k_force_nom, double poly_a0_nom, double poly_a1_nom,
    double throttle_to_thrust, double gravity, double v_nominal, double v_min,
    int substeps, double dt,
    double[::1] vterm_out, cnp.uint8_t[::1] sat_out, cnp.uint8_t[::1] fault_out,
):
    cdef int n = p.shape[0]
    cdef int e, k, i, j
    cdef double lp[3]
    cdef double lv[3]
    cdef double lr[9]
    cdef double lw[3]
    cdef double lm[4]
    cdef double steady[4]
    cdef double pwm[4]
    cdef double thrusts[4]
    cdef double wrench[4]
    cdef double werr[3]
    cdef double jw[3]
    cdef double tau_des[3]
    cdef double k1p[3]
    cdef double k1v[3]
    cdef double k1w[3]
    cdef double k1m[4]
    cdef double k2p[3]
    cdef double k2v[3]
    cdef double k2w[3]
    cdef double k2m[4]
    cdef double k3p[3]
    cdef double k3v[3]
    cdef double k3w[3]
    cdef double k3m[4]
    cdef double k4p[3]
    cdef double k4v[3]
    cdef double k4w[3]
    cdef double k4m[4]
    cdef double yp[3]
    cdef double yv[3]
    cdef double yw[3]
    cdef double ym[4]
    cdef double in_flat[9]
    cdef double iinv_flat[9]
    cdef double inom[9]
    cdef double dragv[3]
    cdef double arms_x[4]
    cdef double arms_y[4]
    cdef double spinv[4]
    cdef double ainv[16]
    cdef double gains[3]
    cdef double voc, power, vt, veff, topn, fmax_t, fdes, throttle
    cdef double wdes[3]
    cdef double omega_cmd, pwm_i, drop, mi
    cdef double m_e, kf_e, kt_e, km_e, a0_e, a1_e, cp_e, cap_e, ri_e
    cdef bint sat, fault, finite

    for i in range(4):
        arms_x[i] = arms[i, 0]
        arms_y[i] = arms[i, 1]
        spinv[i] = spin[i]
    for i in range(3):
        gains[i] = rate_gains[i]
        for j in range(3):
            inom[i * 3 + j] = inertia_nom[i, j]
    for i in range(4):
        for j in range(4):
            ainv[i * 4 + j] = alloc_inv[i, j]

    for e in range(n):
        for i in range(3):
            lp[i] = p[e, i]
            lv[i] = v[e, i]
            lw[i] = w[e, i]
            dragv[i] = drag[e, i]
            for j in range(3):
                lr[i * 3 + j] = r[e, i, j]
                in_flat[i * 3 + j] = inertia[e, i, j]
                iinv_flat[i * 3 + j] = inertia_inv[e, i, j]
        for i in range(4):
            lm[i] = motor[e, i]
        voc = voltage[e]
        m_e = mass[e]
        kf_e = k_force[e]
        kt_e = k_torque[e]
        km_e = k_motor[e]
        a0_e = poly_a0[e]
        a1_e = poly_a1[e]
        cp_e = c_power[e]
        cap_e = capacity[e]
        ri_e = r_int[e]
        throttle = actions[e, 0]
        for i in range(3):
            wdes[i] = actions[e, 1 + i]
        sat = False
        vt = voc

        for k in range(substeps):
            power = 0.0
            for i in range(4):
                mi = lm[i]
                if mi < 0.0:
                    mi = 0.0
                power += mi * mi * mi
            power *= cp_e
            vt = voc - ri_e * power / fmax(voc, 1.0)
            if vt < 0.5 * v_min:
                vt = 0.5 * v_min

            # --- inner loop with nominal constants
            fdes = throttle * throttle_to_thrust
            for i in range(3):
                werr[i] = wdes[i] - lw[i]
            for i in range(3):
                jw[i] = inom[i * 3 + 0] * lw[0] + inom[i * 3 + 1] * lw[1] + inom[i * 3 + 2] * lw[2]
            for i in range(3):
                tau_des[i] = (
                    inom[i * 3 + 0] * (gains[0] * werr[0])
                    + inom[i * 3 + 1] * (gains[1] * werr[1])
                    + inom[i * 3 + 2] * (gains[2] * werr[2])
                )
            tau_des[0] += lw[1] * jw[2] - lw[2] * jw[1]
            tau_des[1] += lw[2] * jw[0] - lw[0] * jw[2]
            tau_des[2] += lw[0] * jw[1] - lw[1] * jw[0]

            wrench[0] = fdes
            wrench[1] = tau_des[0]
            wrench[2] = tau_des[1]
            wrench[3] = tau_des[2]
            topn = poly_a0_nom + poly_a1_nom * vt
            fmax_t = k_force_nom * topn * topn
            for i in range(4):
                thrusts[i] = (
                    ainv[i * 4 + 0] * wrench[0]
                    + ainv[i * 4 + 1] * wrench[1]
                    + ainv[i * 4 + 2] * wrench[2]
                    + ainv[i * 4 + 3] * wrench[3]
                )
                if thrusts[i] < 0.0:
                    thrusts[i] = 0.0
                    sat = True
                elif thrusts[i] > fmax_t:
                    thrusts[i] = fmax_t
                    sat = True
                omega_cmd = sqrt(thrusts[i] / k_force_nom)
                pwm_i = (omega_cmd / topn) * (omega_cmd / topn)
                if pwm_i < 0.0:
                    pwm_i = 0.0
                elif pwm_i > 1.0:
                    pwm_i = 1.0
                pwm[i] = pwm_i

            veff = fmin(fmax(vt, v_min), v_nominal)
            for i in range(4):
                steady[i] = (a0_e + a1_e * veff) * sqrt(pwm[i])

            # --- RK4 on (p, v, w, motor) with attitude frozen
            _deriv(lp, lv, lr, lw, lm, steady, m_e, in_flat, iinv_flat, dragv,
                   kf_e, kt_e, km_e, gravity, arms_x, arms_y, spinv,
                   k1p, k1v, k1w, k1m)
            for i in range(3):
                yp[i] = lp[i] + 0.5 * dt * k1p[i]
                yv[i] = lv[i] + 0.5 * dt * k1v[i]
                yw[i] = lw[i] + 0.5 * dt * k1w[i]
            for i in range(4):
                ym[i] = lm[i] + 0.5 * dt * k1m[i]
            _deriv(yp, yv, lr, yw, ym, steady, m_e, in_flat, iinv_flat, dragv,
                   kf_e, kt_e, km_e, gravity, arms_x, arms_y, spinv,
                   k2p, k2v, k2w, k2m)
            for i in range(3):
                yp[i] = lp[i] + 0.5 * dt * k2p[i]
                yv[i] = lv[i] + 0.5 * dt * k2v[i]
                yw[i] = lw[i] + 0.5 * dt * k2w[i]
            for i in range(4):
                ym[i] = lm[i] + 0.5 * dt * k2m[i]
            _deriv(yp, yv, lr, yw, ym, steady, m_e, in_flat, iinv_flat, dragv,
                   kf_e, kt_e, km_e, gravity, arms_x, arms_y, spinv,
                   k3p, k3v, k3w, k3m)
            for i in range(3):
                yp[i] = lp[i] + dt * k3p[i]
                yv[i] = lv[i] + dt * k3v[i]
                yw[i] = lw[i] + dt * k3w[i]
            for i in range(4):
                ym[i] = lm[i] + dt * k3m[i]
            _deriv(yp, yv, lr, yw, ym, steady, m_e, in_flat, iinv_flat, dragv,
                   kf_e, kt_e, km_e, gravity, arms_x, arms_y, spinv,
                   k4p, k4v, k4w, k4m)

            # attitude first (uses the pre-update body rate)
            _exp_update(lr, lw, dt)

            for i in range(3):
                lp[i] = lp[i] + dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i])
                lv[i] = lv[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
                lw[i] = lw[i] + dt / 6.0 * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i])
            for i in range(4):
                lm[i] = lm[i] + dt / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i])
                if lm[i] < 0.0:
                    lm[i] = 0.0

            power = 0.0
            for i in range(4):
                power += lm[i] * lm[i] * lm[i]
            power *= cp_e
            drop = (v_nominal - v_min) * power * dt / cap_e
            voc = voc - drop
            if voc < v_min:
                voc = v_min
            elif voc > v_nominal:
                voc = v_nominal
            t[e] = t[e] + dt

        finite = isfinite(voc)
        for i in range(3):
            finite = finite and isfinite(lp[i]) and isfinite(lv[i]) and isfinite(lw[i])
        for i in range(9):
            finite = finite and isfinite(lr[i])
        for i in range(4):
            finite = finite and isfinite(lm[i])

        for i in range(3):
            p[e, i] = lp[i]
            v[e, i] = lv[i]
            w[e, i] = lw[i]
            for j in range(3):
                r[e, i, j] = lr[i * 3 + j]
        for i in range(4):
            motor[e, i] = lm[i]
        voltage[e] = voc
        vterm_out[e] = vt
        sat_out[e] = 1 if sat else 0
        fault_out[e] = 0 if finite else 1
