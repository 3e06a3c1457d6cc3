"""Vectorized numpy twin of the compiled stepping kernel.

Mirrors `dynamics.py` arithmetic term for term so the three implementations
(scalar reference, this fallback, the Cython kernel) agree to float rounding.
"""

from __future__ import annotations

import numpy as np

from .rotations import exp_so3_batch as _exp_so3_batch
from .rotations import orthonormalize_batch as _orthonormalize_batch


def _derivatives(p, v, r, w, motor, steady, vp):
    m2 = np.maximum(motor, 0.0) ** 2
    f = vp.k_force[:, None] * m2
    f_sum = f[:, 0] + f[:, 1] + f[:, 2] + f[:, 3]

    arms, spin = vp.arms, vp.spin
    tau = np.empty_like(w)
    tau[:, 0] = f @ arms[:, 1]
    tau[:, 1] = -(f @ arms[:, 0])
    tau[:, 2] = vp.k_torque * (m2 @ spin)

    v_body = np.einsum("nji,nj->ni", r, v)
    force_body = -vp.drag * v_body
    force_body[:, 2] += f_sum
    dv = np.einsum("nij,nj->ni", r, force_body) / vp.mass[:, None]
    dv[:, 2] -= vp.gravity

    jw = np.einsum("nij,nj->ni", vp.inertia, w)
    dw = np.einsum("nij,nj->ni", vp.inertia_inv, tau - np.cross(w, jw))
    dm = (steady - motor) / vp.k_motor[:, None]
    return v.copy(), dv, dw, dm


def step_envs(state, actions, vp, substeps: int, dt: float):
    """Advance all envs by `substeps` 1 kHz controller+integrator steps."""
    n = state.n
    saturated = np.zeros(n, dtype=bool)
    vterm = np.zeros(n)
    throttle = actions[:, 0]
    w_des = actions[:, 1:]

    for _ in range(substeps):
        motor = state.motor
        # terminal voltage with resistive sag under the present draw
        power = vp.c_power * np.sum(np.maximum(motor, 0.0) ** 3, axis=1)
        vterm = np.maximum(
            state.voltage - vp.r_int * power / np.maximum(state.voltage, 1.0),
            0.5 * vp.v_min,
        )

        # inner loop (nominal constants)
        f_des = throttle * vp.throttle_to_thrust
        werr = w_des - state.w
        jw_nom = state.w @ vp.inertia_nom.T
        tau_des = (vp.rate_gains * werr) @ vp.inertia_nom.T + np.cross(state.w, jw_nom)
        wrench = np.concatenate([f_des[:, None], tau_des], axis=1)
        thrusts = wrench @ vp.alloc_inv.T

        top_nom = vp.poly_a0_nom + vp.poly_a1_nom * vterm
        f_max = vp.k_force_nom * top_nom**2
        saturated |= np.any(thrusts < 0.0, axis=1) | np.any(thrusts > f_max[:, None], axis=1)
        thrusts = np.clip(thrusts, 0.0, f_max[:, None])
        omega_cmd = np.sqrt(thrusts / vp.k_force_nom)
        pwm = np.clip((omega_cmd / top_nom[:, None]) ** 2, 0.0, 1.0)

        # physics uses the per-env (randomized) motor curve
        veff = np.minimum(np.maximum(vterm, vp.v_min), vp.v_nominal)
        steady = (vp.poly_a0 + vp.poly_a1 * veff)[:, None] * np.sqrt(pwm)

        y = (state.p, state.v, state.w, motor)
        r = state.r

        def stage(scale, k):
            return _derivatives(
                y[0] + scale * dt * k[0], y[1] + scale * dt * k[1], r,
                y[2] + scale * dt * k[2], y[3] + scale * dt * k[3], steady, vp,
            )

        k1 = _derivatives(y[0], y[1], r, y[2], y[3], steady, vp)
        k2 = stage(0.5, k1)
        k3 = stage(0.5, k2)
        k4 = stage(1.0, k3)
        new = [
            yi + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
        ]

        state.r = _orthonormalize_batch(
            np.einsum("nij,njk->nik", state.r, _exp_so3_batch(state.w * dt))
        )
        state.p, state.v, state.w = new[0], new[1], new[2]
        state.motor = np.maximum(new[3], 0.0)

        power_new = vp.c_power * np.sum(state.motor**3, axis=1)
        drop = (vp.v_nominal - vp.v_min) * power_new * dt / vp.capacity
        state.voltage = np.clip(state.voltage - drop, vp.v_min, vp.v_nominal)
        state.t = state.t + dt

    fault = ~(
        np.all(np.isfinite(state.p), axis=1)
        & np.all(np.isfinite(state.v), axis=1)
        & np.all(np.isfinite(state.w), axis=1)
        & np.all(np.isfinite(state.r.reshape(n, 9)), axis=1)
        & np.all(np.isfinite(state.motor), axis=1)
        & np.isfinite(state.voltage)
    )
    return vterm, saturated, fault
