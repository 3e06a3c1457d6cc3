"""Single-vehicle physics: rigid body, rotor aerodynamics, first-order motors,
battery surrogate, and the 1 kHz body-rate inner loop.

This is the readable reference the vectorized backends mirror; it is what the
unit tests pin down.  Everything is a pure function of (state, inputs, params):
identical inputs produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .params import MavParams
from .rotations import exp_so3, orthonormalize


@dataclass
class MavState:
    """Pose, twist, motor speeds, battery, and time."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r: np.ndarray = field(default_factory=lambda: np.eye(3))   # body -> world
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))  # body frame
    motor: np.ndarray = field(default_factory=lambda: np.zeros(4))  # rad/s
    voltage: float = 25.2    # open-circuit
    t: float = 0.0

    def copy(self) -> "MavState":
        return replace(
            self,
            p=self.p.copy(),
            v=self.v.copy(),
            r=self.r.copy(),
            w=self.w.copy(),
            motor=self.motor.copy(),
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.r))
            and np.all(np.isfinite(self.w))
            and np.all(np.isfinite(self.motor))
            and np.isfinite(self.voltage)
        )


@dataclass
class Action:
    """Collective throttle in [0, 1000] plus desired body rates in rad/s."""

    throttle: float
    rates: np.ndarray

    def clamped(self, params: MavParams) -> "Action":
        return Action(
            throttle=float(np.clip(self.throttle, 0.0, params.throttle_max)),
            rates=np.clip(np.asarray(self.rates, dtype=float), -params.rate_max, params.rate_max),
        )

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.throttle], self.rates])

    @classmethod
    def hover(cls, params: MavParams) -> "Action":
        return cls(throttle=params.hover_throttle, rates=np.zeros(3))


def hover_state(params: MavParams, altitude: float = 3.0) -> MavState:
    """Equilibrium state: level attitude, motors at hover speed, full battery."""
    omega_h = np.sqrt(params.hover_thrust / (4.0 * params.k_force))
    return MavState(
        p=np.array([0.0, 0.0, altitude]),
        motor=np.full(4, omega_h),
        voltage=params.v_nominal,
    )


def forces_and_torques(motor: np.ndarray, params: MavParams) -> tuple[float, np.ndarray]:
    """Collective thrust and body torque from the four motor speeds.

    Per motor: thrust k_force*Omega^2 along body z at the arm position, plus a
    reaction torque k_torque*Omega^2 about body z whose sign follows the spin
    direction.
    """
    f = params.k_force * motor**2
    f_sum = float(f.sum())
    tau = np.zeros(3)
    e3 = np.array([0.0, 0.0, 1.0])
    for i in range(4):
        tau += np.cross(params.arms[i], e3 * f[i])
        tau += params.spin[i] * params.k_torque * motor[i] ** 2 * e3
    return f_sum, tau


def rigid_body_derivative(
    state: MavState, f_sum: float, tau: np.ndarray, params: MavParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives of (v, w) plus dp = v; attitude is integrated separately.

    Thrust acts along body z and is rotated body->world; drag opposes the
    body-frame velocity.
    """
    e3 = np.array([0.0, 0.0, 1.0])
    v_body = state.r.T @ state.v
    force_body = e3 * f_sum - params.drag * v_body
    dv = (state.r @ force_body) / params.mass - params.gravity_vec
    j = params.inertia
    dw = np.linalg.solve(j, tau - np.cross(state.w, j @ state.w))
    return state.v.copy(), dv, dw


def steady_motor_speed(voltage: float, pwm: float, params: MavParams) -> float:
    """Steady-state motor speed for a normalized pwm at the given voltage.

    Monotone in both arguments, zero at zero throttle; out-of-range inputs
    are clamped.
    """
    pwm = min(max(pwm, 0.0), 1.0)
    voltage = min(max(voltage, params.v_min), params.v_nominal)
    return (params.poly_a0 + params.poly_a1 * voltage) * np.sqrt(pwm)


def pwm_for_thrust(thrust: float, voltage: float, params: MavParams) -> float:
    """Inverse of the steady-speed map: per-motor thrust -> pwm in [0, 1]."""
    thrust = max(thrust, 0.0)
    omega = np.sqrt(thrust / params.k_force)
    top = params.poly_a0 + params.poly_a1 * voltage
    return float(np.clip((omega / top) ** 2, 0.0, 1.0))


def motor_derivative(motor: np.ndarray, steady: np.ndarray, params: MavParams) -> np.ndarray:
    """First-order response toward the commanded steady speed."""
    return (steady - motor) / params.k_motor


def body_rate_control(
    action: Action, state: MavState, params: MavParams
) -> tuple[np.ndarray, bool]:
    """1 kHz inner loop: desired rates + throttle -> four pwm commands.

    Proportional body-rate feedback with gyroscopic feedforward gives a
    desired torque; a fixed allocation matrix splits (thrust, torque) into
    per-motor thrusts, which invert the steady-speed map at the present
    voltage.  Returns (pwm, saturated).
    """
    action = action.clamped(params)
    f_des = action.throttle * params.throttle_to_thrust
    j = params.inertia
    tau_des = j @ (params.rate_gains * (action.rates - state.w)) + np.cross(
        state.w, j @ state.w
    )
    wrench = np.concatenate([[f_des], tau_des])
    thrusts = np.linalg.solve(params.allocation_matrix(), wrench)

    v_term = terminal_voltage(state, params)
    f_max = params.k_force * params.max_motor_speed(v_term) ** 2
    saturated = bool(np.any(thrusts < 0.0) or np.any(thrusts > f_max))
    thrusts = np.clip(thrusts, 0.0, f_max)
    pwm = np.array([pwm_for_thrust(f, v_term, params) for f in thrusts])
    return pwm, saturated


def electrical_power(motor: np.ndarray, params: MavParams) -> float:
    return float(params.c_power * np.sum(motor**3))


def terminal_voltage(state: MavState, params: MavParams) -> float:
    """Voltage a sensor would read: open-circuit value minus resistive sag."""
    p = electrical_power(state.motor, params)
    current = p / max(state.voltage, 1.0)
    return float(max(state.voltage - params.r_int * current, 0.5 * params.v_min))


def battery_step(state: MavState, motor: np.ndarray, dt: float, params: MavParams) -> float:
    """Advance the open-circuit voltage by dt of discharge at the given speeds."""
    p = electrical_power(motor, params)
    drop = (params.v_nominal - params.v_min) * p * dt / params.capacity_j
    return float(np.clip(state.voltage - drop, params.v_min, params.v_nominal))


def integrate_step(state: MavState, pwm: np.ndarray, dt: float, params: MavParams) -> MavState:
    """One 1 ms physics step: RK4 on (p, v, w, motor) with the attitude frozen
    during stage evaluation, then an exact exponential-map attitude update and
    a battery update.
    """
    v_term = terminal_voltage(state, params)
    steady = np.array([steady_motor_speed(v_term, u, params) for u in pwm])

    def deriv(p, v, w, motor):
        f_sum, tau = forces_and_torques(np.maximum(motor, 0.0), params)
        probe = replace(state, p=p, v=v, w=w)
        dp, dv, dw = rigid_body_derivative(probe, f_sum, tau, params)
        dm = motor_derivative(motor, steady, params)
        return dp, dv, dw, dm

    y = (state.p, state.v, state.w, state.motor)
    k1 = deriv(*y)
    k2 = deriv(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k1)))
    k3 = deriv(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k2)))
    k4 = deriv(*(yi + dt * ki for yi, ki in zip(y, k3)))
    p, v, w, motor = (
        yi + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    )

    r = orthonormalize(state.r @ exp_so3(state.w * dt))
    out = state.copy()
    out.p, out.v, out.w = p, v, w
    out.motor = np.maximum(motor, 0.0)
    out.r = r
    out.voltage = battery_step(state, out.motor, dt, params)
    out.t = state.t + dt
    return out


def step_with_action(
    state: MavState,
    action: Action,
    params: MavParams,
    substeps: int = 10,
    dt: float = 1e-3,
) -> tuple[MavState, bool]:
    """Advance one policy period (default 10 ms): rerun the inner loop and the
    integrator at 1 kHz with the action held.  Returns (state, saturated)."""
    saturated = False
    for _ in range(substeps):
        pwm, sat = body_rate_control(action, state, params)
        saturated = saturated or sat
        state = integrate_step(state, pwm, dt, params)
    return state, saturated
