"""Classical controllers sharing the policy's action interface (collective
throttle + desired body rates at 100 Hz, tracked by the same inner loop).

- Se3Controller: geometric position/attitude control with circular-reference
  feedforward; the yaw-sweep reference behavior.
- mpc_circle + so3_from_acceleration: finite-horizon linear-quadratic
  tracking on double-integrator translation, solved by backward Riccati
  recursion each call, with an SO(3) attitude stage turning the commanded
  acceleration into throttle and body rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Action, MavState
from .params import MavParams
from .rotations import vee


@dataclass
class CircleReference:
    """Horizontal circle: position/velocity/acceleration at time t.  Positive
    speed orbits counterclockwise seen from above."""

    center: np.ndarray
    radius: float
    speed: float
    phase0: float = 0.0

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def omega(self) -> float:
        return self.speed / self.radius

    def pos(self, t: float) -> np.ndarray:
        a = self.phase0 + self.omega * t
        return self.center + self.radius * np.array([np.cos(a), np.sin(a), 0.0])

    def vel(self, t: float) -> np.ndarray:
        a = self.phase0 + self.omega * t
        return self.radius * self.omega * np.array([-np.sin(a), np.cos(a), 0.0])

    def acc(self, t: float) -> np.ndarray:
        a = self.phase0 + self.omega * t
        return -self.radius * self.omega**2 * np.array([np.cos(a), np.sin(a), 0.0])


def attitude_setpoint(f_vec: np.ndarray, yaw_des: float, params: MavParams):
    """Desired rotation whose body z carries the thrust vector, heading as
    close to yaw_des as the tilt allows.  Near-zero demand falls back to a
    safe upright minimum; returns (r_des, f_vec)."""
    f_norm = float(np.linalg.norm(f_vec))
    min_thrust = 0.05 * params.hover_thrust
    if f_norm < min_thrust:
        f_vec = np.array([0.0, 0.0, min_thrust])
        f_norm = min_thrust
    z_des = f_vec / f_norm
    x_c = np.array([np.cos(yaw_des), np.sin(yaw_des), 0.0])
    y_des = np.cross(z_des, x_c)
    ny = np.linalg.norm(y_des)
    if ny < 1e-6:
        # thrust parallel to the heading axis: pick any consistent frame
        y_des = np.cross(z_des, np.array([0.0, 1.0, 0.0]))
        ny = np.linalg.norm(y_des)
    y_des = y_des / ny
    x_des = np.cross(y_des, z_des)
    return np.stack([x_des, y_des, z_des], axis=1), f_vec


def _attitude_action(
    f_vec: np.ndarray,
    yaw_des: float,
    state: MavState,
    params: MavParams,
    k_att: np.ndarray,
    omega_ff_world: np.ndarray | None = None,
) -> Action:
    """Thrust vector + desired yaw -> (throttle, body rates): proportional
    correction on the rotation group plus the world-frame rate feedforward
    mapped into the body frame."""
    r_des, f_vec = attitude_setpoint(f_vec, yaw_des, params)
    e_r = 0.5 * vee(r_des.T @ state.r - state.r.T @ r_des)
    rates = -k_att * e_r
    if omega_ff_world is not None:
        rates = rates + state.r.T @ omega_ff_world

    f_proj = float(f_vec @ state.r[:, 2])
    throttle = max(f_proj, 0.0) / params.throttle_to_thrust
    return Action(throttle=throttle, rates=rates).clamped(params)


@dataclass
class Se3Controller:
    """Geometric tracking controller; reentrant, stateless between calls."""

    params: MavParams
    kp: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 12.0]))
    kv: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 7.0]))
    k_att: np.ndarray = field(default_factory=lambda: np.array([9.0, 9.0, 9.0]))

    def control(
        self,
        state: MavState,
        target_p: np.ndarray,
        target_v: np.ndarray | None = None,
        target_a: np.ndarray | None = None,
        yaw_des: float = 0.0,
        omega_ff_world: np.ndarray | None = None,
    ) -> Action:
        p = self.params
        target_v = np.zeros(3) if target_v is None else target_v
        target_a = np.zeros(3) if target_a is None else target_a
        a_des = target_a + self.kp * (target_p - state.p) + self.kv * (target_v - state.v)
        f_vec = p.mass * (a_des + p.gravity_vec)
        return _attitude_action(f_vec, yaw_des, state, p, self.k_att, omega_ff_world)

    def circle_action(self, state: MavState, ref: CircleReference, t: float) -> Action:
        """Track the circular reference, nose to the center, with the
        rotating-frame angular feedforward."""
        pos = ref.pos(t)
        radial = pos[:2] - ref.center[:2]
        yaw_des = float(np.arctan2(-radial[1], -radial[0]))  # look at the center
        ff = np.array([0.0, 0.0, ref.omega])
        return self.control(
            state, pos, ref.vel(t), ref.acc(t), yaw_des=yaw_des, omega_ff_world=ff
        )


def riccati_lq_tracking(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    p_term: np.ndarray,
    x_refs: np.ndarray,
    u_refs: np.ndarray,
    x0: np.ndarray,
    return_gains: bool = False,
):
    """First input of the finite-horizon LQ tracking problem

        min sum_k (x_k - xr_k)' Q (x_k - xr_k) + (u_k - ur_k)' R (u_k - ur_k)
            + (x_N - xr_N)' P (x_N - xr_N)

    solved by a backward Riccati recursion with an affine term.  x_refs has
    N+1 rows, u_refs N rows.
    """
    n_steps = u_refs.shape[0]
    s_mat = p_term.copy()
    s_vec = -p_term @ x_refs[n_steps]
    gains = []
    cost_mats = [s_mat.copy()]
    for k in range(n_steps - 1, -1, -1):
        h = r + b.T @ s_mat @ b
        k_gain = np.linalg.solve(h, b.T @ s_mat @ a)
        d = -np.linalg.solve(h, b.T @ s_vec - r @ u_refs[k])
        s_next = s_mat
        s_mat = q + a.T @ s_mat @ a - k_gain.T @ h @ k_gain
        s_mat = 0.5 * (s_mat + s_mat.T)
        s_vec = -q @ x_refs[k] + a.T @ (s_vec + s_next @ b @ d)
        gains.append((k_gain, d))
        cost_mats.append(s_mat.copy())
    k_gain, d = gains[-1]
    u0 = -k_gain @ x0 + d
    if return_gains:
        return u0, cost_mats
    return u0


@dataclass
class MpcCircle:
    """Linear MPC on double-integrator translation: horizon of acceleration
    commands toward the circular reference; only the first is applied."""

    params: MavParams
    ref: CircleReference
    horizon: int = 20
    dt: float = 0.05
    q_pos: float = 20.0
    q_vel: float = 8.0
    r_acc: float = 0.1

    def __post_init__(self) -> None:
        n = 3
        self.a_mat = np.eye(2 * n)
        self.a_mat[:n, n:] = self.dt * np.eye(n)
        self.b_mat = np.vstack([0.5 * self.dt**2 * np.eye(n), self.dt * np.eye(n)])
        self.q_mat = np.diag([self.q_pos] * n + [self.q_vel] * n)
        self.r_mat = self.r_acc * np.eye(n)
        self.p_mat = self.q_mat * 5.0

    def acceleration(self, state: MavState, t: float) -> np.ndarray:
        """Desired world acceleration (gravity-free), clamped to the thrust
        envelope afterward by the attitude stage caller."""
        x0 = np.concatenate([state.p, state.v])
        ks = np.arange(self.horizon + 1)
        x_refs = np.stack(
            [np.concatenate([self.ref.pos(t + k * self.dt), self.ref.vel(t + k * self.dt)]) for k in ks]
        )
        u_refs = np.stack([self.ref.acc(t + k * self.dt) for k in ks[:-1]])
        return riccati_lq_tracking(
            self.a_mat, self.b_mat, self.q_mat, self.r_mat, self.p_mat, x_refs, u_refs, x0
        )

    def control(self, state: MavState, t: float, yaw_des: float = 0.0) -> Action:
        a_des = self.acceleration(state, t)
        return so3_from_acceleration(a_des, yaw_des, state, self.params)


def so3_from_acceleration(
    a_des: np.ndarray, yaw_des: float, state: MavState, params: MavParams,
    k_att: np.ndarray | None = None,
) -> Action:
    """Acceleration command -> throttle + body rates: desired body z along
    (a_des + g), thrust from the projection onto the current body z."""
    k_att = np.array([9.0, 9.0, 9.0]) if k_att is None else k_att
    f_vec = params.mass * (a_des + params.gravity_vec)
    # clamp to the thrust envelope, keeping direction
    f_max = 0.95 * 4.0 * params.k_force * params.max_motor_speed(params.v_nominal) ** 2
    norm = float(np.linalg.norm(f_vec))
    if norm > f_max:
        f_vec = f_vec * (f_max / norm)
    return _attitude_action(f_vec, yaw_des, state, params, k_att)
