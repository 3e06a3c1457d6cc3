"""The maneuver MDP: observation construction, task rewards, curriculum
randomization, command events, and vectorized stepping.

Observation layout is identical across tasks; only the flag/command semantics
differ.  The matrix mode is 26-dimensional:

    [p_rel_body(3) | vec(R_rel_body)(9) | flag | command |
     v_body(3) | w_body(3) | altitude | voltage | prev_action(4)]

The quaternion mode replaces the 9 matrix entries with a 4-entry unit
quaternion (21 dims total).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import VecParams, VecState, step_envs
from .dynamics import MavState
from .params import MavParams
from .rewards import RewardConfig, sub_reward, sub_reward_sq
from .rotations import (
    exp_so3_batch,
    mat_to_quat,
    mat_to_quat_batch,
    unwrap_step_batch,
    yaw_rotation,
)
from .tasks import TASK_CIRCLE, TASK_FLIP, TASK_POS, TASK_NAMES, TaskSpec

OBS_DIM = {"mat": 26, "quat": 21}
CRITIC_DIM = 30
REWARD_TERMS = ["position", "attitude", "altitude", "radius", "speed", "heading", "flip_left"]


def obs_slices(mode: str) -> dict[str, slice]:
    att = 9 if mode == "mat" else 4
    i = 3 + att
    return {
        "p_rel": slice(0, 3),
        "attitude": slice(3, 3 + att),
        "flag": slice(i, i + 1),
        "command": slice(i + 1, i + 2),
        "v_body": slice(i + 2, i + 5),
        "w_body": slice(i + 5, i + 8),
        "altitude": slice(i + 8, i + 9),
        "voltage": slice(i + 9, i + 10),
        "prev_action": slice(i + 10, i + 14),
    }


def build_observation(
    state: MavState,
    task: TaskSpec,
    prev_action: np.ndarray,
    mode: str = "mat",
    params: MavParams | None = None,
) -> np.ndarray:
    """Single-vehicle observation; the vectorized env mirrors this exactly.

    When `params` is given the voltage entry is the sagged terminal reading,
    as a sensor would report it; otherwise the open-circuit value is used.
    """
    from .dynamics import terminal_voltage

    p_v, r_v = task.target_state()
    p_rel_b = state.r.T @ (p_v - state.p)
    r_rel = state.r.T @ r_v
    att = r_rel.reshape(9) if mode == "mat" else mat_to_quat(r_rel)
    command = task.command
    if task.flag == TASK_FLIP:
        command = float(np.clip(command, -2.0 * np.pi, 2.0 * np.pi))
    volt = terminal_voltage(state, params) if params is not None else state.voltage
    return np.concatenate(
        [
            p_rel_b,
            att,
            [task.flag, command],
            state.r.T @ state.v,
            state.w,
            [state.p[2], volt],
            prev_action,
        ]
    )


def apply_obs_noise(
    obs: np.ndarray, mode: str, scales: dict[str, float], rng: np.random.Generator
) -> np.ndarray:
    """Sensor-style noise on a batch of observations: additive on positions,
    velocities, rates, altitude, and voltage; a small random rotation composed
    onto the relative attitude."""
    out = obs.copy()
    sl = obs_slices(mode)
    n = obs.shape[0]
    out[:, sl["p_rel"]] += rng.normal(0.0, scales.get("pos", 0.0), (n, 3))
    out[:, sl["v_body"]] += rng.normal(0.0, scales.get("vel", 0.0), (n, 3))
    out[:, sl["w_body"]] += rng.normal(0.0, scales.get("rate", 0.0), (n, 3))
    out[:, sl["altitude"]] += rng.normal(0.0, scales.get("pos", 0.0), (n, 1))
    out[:, sl["voltage"]] += rng.normal(0.0, scales.get("volt", 0.0), (n, 1))
    att_scale = scales.get("att", 0.0)
    if att_scale > 0.0:
        eps = rng.normal(0.0, att_scale, (n, 3))
        rot = exp_so3_batch(eps)
        if mode == "mat":
            r_rel = out[:, sl["attitude"]].reshape(n, 3, 3)
            out[:, sl["attitude"]] = np.einsum("nij,njk->nik", r_rel, rot).reshape(n, 9)
        else:
            r_rel = np.stack([yaw_rotation(0.0)] * n)  # placeholder, replaced below
            from .rotations import quat_to_mat

            for i in range(n):
                r_rel[i] = quat_to_mat(out[i, sl["attitude"]])
            out[:, sl["attitude"]] = mat_to_quat_batch(
                np.einsum("nij,njk->nik", r_rel, rot)
            )
    return out


@dataclass
class EpisodeConfig:
    """Episode limits plus the full-curriculum randomization ranges."""

    max_steps: int = 1500           # 15 s at the 100 Hz policy rate
    min_altitude: float = 0.1       # terminate below this

    # reset ranges at curriculum level 1 (uniform, centered on nominal)
    pos_radius: float = 2.0         # m, horizontal about the target
    alt_range: float = 1.5          # m, vertical about the target
    vel_range: float = 2.0          # m/s per axis
    rate_range: float = 2.0         # rad/s per axis
    tilt_range: float = np.pi       # rad, random attitude angle (POS)
    circle_tilt_range: float = 0.4  # rad (CIRCLE keeps mild initial tilt)
    yaw_range: float = np.pi
    motor_range: float = 0.2        # fraction about hover speed
    voltage_range: float = 0.5      # fraction of (v0 - vmin) below full

    # task commands
    circle_speed_max: float = 5.0   # m/s
    circle_radius: float = 1.2      # m, fixed per run
    flip_spin: float = 10.0         # rad/s initial roll rate for seeded flips
    command_interval: int = 300     # steps between online command events

    # multiplicative dynamic-parameter perturbations at curriculum 1
    randomize_params: bool = True
    mass_range: float = 0.10
    inertia_range: float = 0.10
    k_force_range: float = 0.10
    k_motor_range: float = 0.20
    drag_range: float = 0.30
    poly_range: float = 0.05

    curriculum_floor: float = 0.1   # ranges never collapse entirely


class VecEnv:
    """n independent vehicles sharing one task type (or a per-env mix)."""

    def __init__(
        self,
        n: int,
        task: str = "pos",
        params: MavParams | None = None,
        episode: EpisodeConfig | None = None,
        rewards: RewardConfig | None = None,
        obs_mode: str = "mat",
        seed: int = 0,
        backend: str | None = None,
        training_events: bool = True,
        substeps: int = 10,
        inner_dt: float = 1e-3,
    ):
        if obs_mode not in OBS_DIM:
            raise ValueError(f"unknown observation mode {obs_mode!r}")
        if task != "multi" and task not in TASK_NAMES:
            raise ValueError(f"unknown task {task!r}")
        self.n = n
        self.task = task
        self.params = params or MavParams()
        self.episode = episode or EpisodeConfig()
        self.rewards = rewards or RewardConfig()
        self.obs_mode = obs_mode
        self.backend = backend
        self.training_events = training_events
        self.substeps = substeps
        self.inner_dt = inner_dt
        self.rng = np.random.default_rng(seed)
        self.curriculum = 0.0

        self.state = VecState.zeros(n)
        self.vp = VecParams.nominal(self.params, n)
        self.hover_motor = float(np.sqrt(self.params.hover_thrust / (4.0 * self.params.k_force)))

        self.flag = np.zeros(n)
        self.target_p = np.zeros((n, 3))
        self.target_yaw = np.zeros(n)
        self.target_r = np.tile(np.eye(3), (n, 1, 1))
        self.radius = np.full(n, self.episode.circle_radius)
        self.speed = np.zeros(n)
        self.flip_total = np.zeros(n)
        self.flip_done = np.zeros(n)
        self.roll_prev = np.zeros(n)
        self.radial_mem = np.tile(np.array([1.0, 0.0]), (n, 1))
        self.prev_action = np.zeros((n, 4))
        self.steps = np.zeros(n, dtype=int)

        self._ep_return = np.zeros(n)
        self._finished: list[tuple[float, int]] = []

        if task == "multi":
            thirds = np.array_split(np.arange(n), 3)
            for sub, fl in zip(thirds, (TASK_POS, TASK_CIRCLE, TASK_FLIP)):
                self.flag[sub] = fl
        else:
            self.flag[:] = TASK_NAMES[task]
        self.reset_all()

    # --- reset -------------------------------------------------------------

    def reset_all(self) -> np.ndarray:
        self._reset_idx(np.arange(self.n))
        return self.observations()

    def _scale(self) -> float:
        f = self.episode.curriculum_floor
        return f + (1.0 - f) * float(np.clip(self.curriculum, 0.0, 1.0))

    def _reset_idx(self, idx: np.ndarray) -> None:
        if len(idx) == 0:
            return
        ep, rng, s = self.episode, self.rng, self._scale()
        m = len(idx)

        self.target_p[idx, 0:2] = 0.0
        self.target_p[idx, 2] = 3.0
        pos_task = self.flag[idx] == TASK_POS
        self.target_yaw[idx] = np.where(
            pos_task, rng.uniform(-ep.yaw_range * s, ep.yaw_range * s, m), 0.0
        )
        for j, i in enumerate(idx):
            self.target_r[i] = yaw_rotation(self.target_yaw[i]) if pos_task[j] else np.eye(3)

        # half the POS resets park near the target with a pure yaw error (the
        # manifold the sweep studies probe); the rest scatter fully
        pos_task_m = self.flag[idx] == TASK_POS
        pure_yaw = pos_task_m & (rng.random(m) < 0.5)
        shrink = np.where(pure_yaw, 0.2, 1.0)

        self.state.p[idx, 0:2] = self.target_p[idx, 0:2] + shrink[:, None] * rng.uniform(
            -ep.pos_radius * s, ep.pos_radius * s, (m, 2)
        )
        self.state.p[idx, 2] = np.maximum(
            self.target_p[idx, 2]
            + shrink * rng.uniform(-ep.alt_range * s, ep.alt_range * s, m),
            0.5,
        )
        self.state.v[idx] = shrink[:, None] * rng.uniform(
            -ep.vel_range * s, ep.vel_range * s, (m, 3)
        )
        self.state.w[idx] = shrink[:, None] * rng.uniform(
            -ep.rate_range * s, ep.rate_range * s, (m, 3)
        )

        # attitude: POS recovers from anywhere, CIRCLE starts mildly tilted,
        # FLIP starts rolled (and possibly spinning) about x
        axis = rng.normal(size=(m, 3))
        axis /= np.linalg.norm(axis, axis=1)[:, None]
        angle = rng.uniform(0.0, ep.tilt_range * s, m)
        rotvec = axis * angle[:, None]
        yaw_only = rng.uniform(-ep.yaw_range, ep.yaw_range, m) * np.maximum(s, 0.3)

        circ = self.flag[idx] == TASK_CIRCLE
        flip = self.flag[idx] == TASK_FLIP
        yaw0 = rng.uniform(-ep.yaw_range * s, ep.yaw_range * s, m)
        tilt_c = rng.uniform(-ep.circle_tilt_range * s, ep.circle_tilt_range * s, (m, 2))
        roll0 = rng.uniform(-np.pi * s, np.pi * s, m)
        wob = rng.uniform(-0.2 * s, 0.2 * s, (m, 2))

        rots = exp_so3_batch(rotvec)
        self.state.r[idx] = rots
        for j, i in enumerate(idx):
            if circ[j]:
                self.state.r[i] = yaw_rotation(yaw0[j]) @ exp_so3_batch(
                    np.array([[tilt_c[j, 0], tilt_c[j, 1], 0.0]])
                )[0]
            elif flip[j]:
                rx = np.array([roll0[j], wob[j, 0], wob[j, 1]])
                self.state.r[i] = exp_so3_batch(rx[None])[0]
            elif pure_yaw[j]:
                self.state.r[i] = yaw_rotation(yaw_only[j])

        spin_sign = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        spin_mag = rng.uniform(0.5, 1.0, m) * ep.flip_spin * max(s, 0.3)
        seeded = flip & (rng.random(m) < 0.5)
        self.state.w[idx, 0] = np.where(seeded, spin_sign * spin_mag, self.state.w[idx, 0])

        self.state.motor[idx] = self.hover_motor * (
            1.0 + rng.uniform(-ep.motor_range * s, ep.motor_range * s, (m, 4))
        )
        dv = self.params.v_nominal - self.params.v_min
        self.state.voltage[idx] = self.params.v_nominal - rng.uniform(
            0.0, ep.voltage_range * dv * s, m
        )
        self.state.t[idx] = 0.0

        # task commands
        self.radius[idx] = ep.circle_radius
        self.speed[idx] = np.where(
            circ, rng.uniform(-ep.circle_speed_max * s, ep.circle_speed_max * s, m), 0.0
        )
        roll_now = np.arctan2(self.state.r[idx, 2, 1], self.state.r[idx, 2, 2])
        self.roll_prev[idx] = roll_now
        self.flip_done[idx] = np.where(flip, roll_now, 0.0)
        self.flip_total[idx] = np.where(seeded, spin_sign * 2.0 * np.pi, 0.0)

        self.radial_mem[idx] = np.array([1.0, 0.0])
        self.prev_action[idx] = 0.0
        self.prev_action[idx, 0] = self.params.hover_throttle
        self.steps[idx] = 0
        self._ep_return[idx] = 0.0
        if not hasattr(self, "_vterm"):
            self._vterm = self.state.voltage.copy()
        power = self.vp.c_power[idx] * np.sum(self.state.motor[idx] ** 3, axis=1)
        self._vterm[idx] = np.maximum(
            self.state.voltage[idx]
            - self.vp.r_int[idx] * power / np.maximum(self.state.voltage[idx], 1.0),
            0.5 * self.params.v_min,
        )

        if ep.randomize_params:
            self._randomize_params(idx, s)

    def _randomize_params(self, idx: np.ndarray, s: float) -> None:
        ep, rng, p = self.episode, self.rng, self.params
        m = len(idx)

        def u(r):
            return 1.0 + rng.uniform(-r * s, r * s, m)

        self.vp.mass[idx] = p.mass * u(ep.mass_range)
        self.vp.set_inertia_scale(idx, u(ep.inertia_range))
        self.vp.k_force[idx] = p.k_force * u(ep.k_force_range)
        self.vp.k_torque[idx] = p.k_torque * u(ep.k_force_range)
        self.vp.k_motor[idx] = p.k_motor * u(ep.k_motor_range)
        self.vp.drag[idx] = p.drag[None, :] * u(ep.drag_range)[:, None]
        poly = u(ep.poly_range)
        self.vp.poly_a0[idx] = p.poly_a0 * poly
        self.vp.poly_a1[idx] = p.poly_a1 * poly

    # --- stepping ------------------------------------------------------------

    def step(self, actions: np.ndarray):
        """Advance one policy period.  Returns (obs, rewards, dones, info);
        done envs are auto-reset and `obs` reflects the reset state."""
        ep = self.episode
        actions = np.asarray(actions, dtype=float).reshape(self.n, 4).copy()
        np.clip(actions[:, 0], 0.0, self.params.throttle_max, out=actions[:, 0])
        np.clip(actions[:, 1:], -self.params.rate_max, self.params.rate_max, out=actions[:, 1:])

        if self.training_events:
            self._command_events()

        vterm, saturated, fault = step_envs(
            self.state, actions, self.vp, self.substeps, self.inner_dt, backend=self.backend
        )
        self._vterm = vterm
        self.prev_action = actions
        self.steps += 1

        roll_now = np.arctan2(self.state.r[:, 2, 1], self.state.r[:, 2, 2])
        self.flip_done += unwrap_step_batch(self.roll_prev, roll_now)
        self.roll_prev = roll_now

        rewards, terms = self._compute_rewards()
        low = self.state.p[:, 2] < ep.min_altitude
        timeout = self.steps >= ep.max_steps
        dones = fault | low | timeout
        self._ep_return += rewards

        info = {
            "saturated": saturated,
            "fault": fault,
            "timeout": timeout & ~(fault | low),
            "reward_terms": terms,
            "terminal_critic_obs": self.critic_observations(),
            "terminal_voltage": vterm,
        }

        done_idx = np.flatnonzero(dones)
        for i in done_idx:
            self._finished.append((float(self._ep_return[i]), int(self.steps[i])))
        self._reset_idx(done_idx)
        info["critic_obs"] = self.critic_observations()
        return self.observations(), rewards, dones, info

    def _command_events(self) -> None:
        """Mid-episode command changes, mimicking online operator edits."""
        ep, rng = self.episode, self.rng
        due = (self.steps > 0) & (self.steps % ep.command_interval == 0)
        if not np.any(due):
            return
        s = self._scale()
        circ = due & (self.flag == TASK_CIRCLE)
        idx = np.flatnonzero(circ)
        if len(idx):
            self.speed[idx] = rng.uniform(
                -ep.circle_speed_max * s, ep.circle_speed_max * s, len(idx)
            )
        flip = due & (self.flag == TASK_FLIP)
        idx = np.flatnonzero(flip)
        if len(idx):
            turns = rng.choice([-2, -1, 0, 1, 2], size=len(idx), p=[0.1, 0.25, 0.3, 0.25, 0.1])
            self.flip_total[idx] += 2.0 * np.pi * turns
        pos = due & (self.flag == TASK_POS)
        idx = np.flatnonzero(pos)
        if len(idx):
            # operator retargets: usually a fresh yaw (hover at a new heading,
            # the state the sweep studies probe), occasionally a position move
            redo_yaw = rng.random(len(idx)) < 0.35
            new_yaw = rng.uniform(-np.pi, np.pi, len(idx)) * max(s, 0.3)
            move = rng.random(len(idx)) < 0.15
            delta = rng.uniform(-1.0, 1.0, (len(idx), 3)) * np.array([1.0, 1.0, 0.5]) * s
            for j, i in enumerate(idx):
                if redo_yaw[j]:
                    self.target_yaw[i] = new_yaw[j]
                    self.target_r[i] = yaw_rotation(new_yaw[j])
                if move[j]:
                    self.target_p[i, :2] += delta[j, :2]
                    self.target_p[i, 2] = max(self.target_p[i, 2] + delta[j, 2], 1.0)

    # --- observations ----------------------------------------------------------

    def _relatives(self):
        p_rel_w = self.target_p - self.state.p
        p_rel_b = np.einsum("nji,nj->ni", self.state.r, p_rel_w)
        r_rel = np.einsum("nji,njk->nik", self.state.r, self.target_r)
        return p_rel_w, p_rel_b, r_rel

    def observations(self) -> np.ndarray:
        _, p_rel_b, r_rel = self._relatives()
        n = self.n
        att = (
            r_rel.reshape(n, 9)
            if self.obs_mode == "mat"
            else mat_to_quat_batch(r_rel)
        )
        command = np.where(
            self.flag == TASK_FLIP,
            np.clip(self.flip_total - self.flip_done, -2.0 * np.pi, 2.0 * np.pi),
            np.where(self.flag == TASK_CIRCLE, self.speed, 0.0),
        )
        v_b = np.einsum("nji,nj->ni", self.state.r, self.state.v)
        vterm = getattr(self, "_vterm", np.full(n, self.params.v_nominal))
        return np.concatenate(
            [
                p_rel_b,
                att,
                self.flag[:, None],
                command[:, None],
                v_b,
                self.state.w,
                self.state.p[:, 2:3],
                vterm[:, None],
                self.prev_action,
            ],
            axis=1,
        )

    def critic_observations(self) -> np.ndarray:
        """Privileged input: noiseless matrix-mode observation + motor speeds."""
        _, p_rel_b, r_rel = self._relatives()
        n = self.n
        command = np.where(
            self.flag == TASK_FLIP,
            np.clip(self.flip_total - self.flip_done, -2.0 * np.pi, 2.0 * np.pi),
            np.where(self.flag == TASK_CIRCLE, self.speed, 0.0),
        )
        v_b = np.einsum("nji,nj->ni", self.state.r, self.state.v)
        vterm = getattr(self, "_vterm", np.full(n, self.params.v_nominal))
        omega_full = self.params.max_motor_speed(self.params.v_nominal)
        return np.concatenate(
            [
                p_rel_b,
                r_rel.reshape(n, 9),
                self.flag[:, None],
                command[:, None],
                v_b,
                self.state.w,
                self.state.p[:, 2:3],
                vterm[:, None],
                self.prev_action,
                self.state.motor / omega_full,
            ],
            axis=1,
        )

    # --- rewards -----------------------------------------------------------------

    def _compute_rewards(self):
        cfg = self.rewards
        n = self.n
        p_rel_w, p_rel_b, r_rel = self._relatives()
        terms = np.zeros((n, len(REWARD_TERMS)))
        total = np.ones(n)

        pos_m = self.flag == TASK_POS
        circ_m = self.flag == TASK_CIRCLE
        flip_m = self.flag == TASK_FLIP

        p_sq = np.sum(p_rel_b * p_rel_b, axis=1)
        r_pos = sub_reward_sq(p_sq, cfg.position)

        if np.any(pos_m):
            tr = np.einsum("nii->n", r_rel)
            ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
            r_att = sub_reward_sq(ang**2, cfg.attitude)
            terms[pos_m, 0] = r_pos[pos_m]
            terms[pos_m, 1] = r_att[pos_m]
            total[pos_m] = r_pos[pos_m] * r_att[pos_m]

        if np.any(circ_m):
            alt = p_rel_w[:, 2]
            d = -p_rel_w[:, :2]
            dist = np.hypot(d[:, 0], d[:, 1])
            ok = dist >= 1e-2
            radial = np.where(ok[:, None], d / np.maximum(dist, 1e-2)[:, None], self.radial_mem)
            self.radial_mem[circ_m & ok] = radial[circ_m & ok]
            tangent = np.stack([-radial[:, 1], radial[:, 0]], axis=1)
            v_perp = np.sum(self.state.v[:, :2] * tangent, axis=1)

            bx = self.state.r[:, :2, 0]
            nb = np.hypot(bx[:, 0], bx[:, 1])
            to_center = -radial
            cosang = np.clip(
                np.sum(bx * to_center, axis=1) / np.maximum(nb, 1e-9), -1.0, 1.0
            )
            head = np.where(nb < 1e-9, 0.0, np.arccos(cosang))

            r_alt = sub_reward_sq(alt**2, cfg.altitude)
            r_rad = sub_reward_sq((dist - self.radius) ** 2, cfg.radius)
            r_spd = sub_reward_sq((v_perp - self.speed) ** 2, cfg.speed)
            r_head = sub_reward_sq(head**2, cfg.heading)
            terms[circ_m, 2] = r_alt[circ_m]
            terms[circ_m, 3] = r_rad[circ_m]
            terms[circ_m, 4] = r_spd[circ_m]
            terms[circ_m, 5] = r_head[circ_m]
            total[circ_m] = (r_alt * r_rad * r_spd * r_head)[circ_m]
            self._v_perp = v_perp

        if np.any(flip_m):
            bx = self.state.r[:, :, 0]
            tx = self.target_r[:, :, 0]
            cosang = np.clip(np.sum(bx * tx, axis=1), -1.0, 1.0)
            x_ang = np.arccos(cosang)
            remaining = self.flip_total - self.flip_done
            r_att = sub_reward_sq(x_ang**2, cfg.attitude)
            r_flip = sub_reward_sq(remaining**2, cfg.flip_left)
            terms[flip_m, 0] = r_pos[flip_m]
            terms[flip_m, 1] = r_att[flip_m]
            terms[flip_m, 6] = r_flip[flip_m]
            total[flip_m] = (r_pos * r_att * r_flip)[flip_m]

        return total, terms

    # --- online edits (service / operator path) ------------------------------------

    def set_circle_speed(self, i: int, speed: float) -> float:
        ep = self.episode
        clamped = float(np.clip(speed, -ep.circle_speed_max, ep.circle_speed_max))
        self.speed[i] = clamped
        return clamped

    def trigger_flip(self, i: int, turns: int = 1) -> None:
        self.flip_total[i] += 2.0 * np.pi * turns

    def set_target(self, i: int, p: np.ndarray, yaw: float | None = None) -> None:
        self.target_p[i] = np.asarray(p, dtype=float)
        if yaw is not None and self.flag[i] == TASK_POS:
            self.target_yaw[i] = float(yaw)
            self.target_r[i] = yaw_rotation(float(yaw))

    def set_task(self, i: int, kind: str) -> None:
        if kind not in TASK_NAMES:
            raise ValueError(f"unknown task kind {kind!r}")
        self.flag[i] = TASK_NAMES[kind]
        self.speed[i] = 0.0
        self.flip_total[i] = 0.0
        roll_now = float(np.arctan2(self.state.r[i, 2, 1], self.state.r[i, 2, 2]))
        self.flip_done[i] = roll_now if self.flag[i] == TASK_FLIP else 0.0
        self.roll_prev[i] = roll_now
        self.target_yaw[i] = 0.0
        self.target_r[i] = np.eye(3)

    def task_spec(self, i: int) -> TaskSpec:
        return TaskSpec(
            flag=float(self.flag[i]),
            target_p=self.target_p[i].copy(),
            yaw=float(self.target_yaw[i]),
            radius=float(self.radius[i]),
            speed=float(self.speed[i]),
            flip_total=float(self.flip_total[i]),
            flip_done=float(self.flip_done[i]),
        )

    def mav_state(self, i: int) -> MavState:
        return MavState(
            p=self.state.p[i].copy(),
            v=self.state.v[i].copy(),
            r=self.state.r[i].copy(),
            w=self.state.w[i].copy(),
            motor=self.state.motor[i].copy(),
            voltage=float(self.state.voltage[i]),
            t=float(self.state.t[i]),
        )

    def pop_episode_stats(self) -> list[tuple[float, int]]:
        out, self._finished = self._finished, []
        return out
