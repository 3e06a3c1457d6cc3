"""One control interface for policies and classical baselines: a controller
maps the current env snapshot to an Action array at the policy rate, so the
same inner loop, logger, eval harness, and live service drive any of them."""

from __future__ import annotations

import numpy as np

from .baselines import CircleReference, MpcCircle, Se3Controller
from .env import VecEnv, apply_obs_noise
from .params import MavParams
from .policy import PolicyNet, load_policy
from .tasks import TASK_CIRCLE, TASK_POS


class PolicyController:
    """Deterministic (mean-action) policy rollout, optionally through the
    sensor-noise model with its own stream."""

    def __init__(self, policy: PolicyNet, noise: dict | None = None, seed: int = 0):
        self.policy = policy
        self.noise = noise
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        pass

    def act(self, env: VecEnv) -> np.ndarray:
        obs = env.observations()
        if self.noise:
            obs = apply_obs_noise(obs, self.policy.obs_mode, self.noise, self.rng)
        return self.policy.forward(obs)


def _noisy_state(state, noise: dict | None, rng: np.random.Generator | None):
    """Measurement noise for the classical controllers (they read estimated
    state the way the policy reads noisy observations)."""
    if not noise or rng is None:
        return state
    from .rotations import exp_so3

    state.p = state.p + rng.normal(0.0, noise.get("pos", 0.0), 3)
    state.v = state.v + rng.normal(0.0, noise.get("vel", 0.0), 3)
    att = noise.get("att", 0.0)
    if att > 0:
        state.r = state.r @ exp_so3(rng.normal(0.0, att, 3))
    state.w = state.w + rng.normal(0.0, noise.get("rate", 0.0), 3)
    return state


class Se3TaskController:
    """Geometric controller wired to the env's task: hover for POS, circular
    reference (nose to center) for CIRCLE."""

    def __init__(self, params: MavParams, noise: dict | None = None, seed: int = 0):
        self.params = params
        self.ctl = Se3Controller(params)
        self._refs: dict[int, CircleReference] = {}
        self.noise = noise
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        self._refs.clear()

    def _ref(self, env: VecEnv, i: int) -> CircleReference:
        ref = self._refs.get(i)
        speed = max(float(abs(env.speed[i])), 1e-3) * np.sign(env.speed[i] or 1.0)
        if ref is None or ref.speed != speed:
            # phase chosen so the reference starts at the vehicle's bearing
            d = env.state.p[i, :2] - env.target_p[i, :2]
            phase = float(np.arctan2(d[1], d[0])) if np.hypot(*d) > 1e-6 else 0.0
            ref = CircleReference(
                center=env.target_p[i].copy(),
                radius=float(env.radius[i]),
                speed=speed,
                phase0=phase - env.speed[i] / env.radius[i] * env.state.t[i],
            )
            self._refs[i] = ref
        return ref

    def act(self, env: VecEnv) -> np.ndarray:
        out = np.zeros((env.n, 4))
        for i in range(env.n):
            state = _noisy_state(env.mav_state(i), self.noise, self.rng)
            if env.flag[i] == TASK_CIRCLE and abs(env.speed[i]) > 1e-6:
                ref = self._ref(env, i)
                action = self.ctl.circle_action(state, ref, float(state.t))
            else:
                action = self.ctl.control(
                    state, env.target_p[i], yaw_des=float(env.target_yaw[i])
                )
            out[i] = action.as_array()
        return out


class MpcTaskController:
    """Linear MPC + SO(3) stage on the env's circle task (hover reference when
    the commanded speed is zero)."""

    def __init__(self, params: MavParams, noise: dict | None = None, seed: int = 0):
        self.params = params
        self._mpc: dict[int, MpcCircle] = {}
        self.noise = noise
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        self._mpc.clear()

    def act(self, env: VecEnv) -> np.ndarray:
        out = np.zeros((env.n, 4))
        for i in range(env.n):
            state = _noisy_state(env.mav_state(i), self.noise, self.rng)
            speed = float(env.speed[i])
            mpc = self._mpc.get(i)
            if mpc is None or mpc.ref.speed != speed:
                ref = CircleReference(
                    center=env.target_p[i].copy(),
                    radius=float(env.radius[i]),
                    speed=speed if abs(speed) > 1e-6 else 1e-6,
                )
                mpc = MpcCircle(self.params, ref)
                self._mpc[i] = mpc
            out[i] = mpc.control(state, float(state.t)).as_array()
        return out


class DelayedController:
    """Actuation latency: actions reach the vehicle `delay` policy steps
    after they were computed (sensor-to-ESC latency exists on any real
    airframe; a zero-latency loop flatters every controller)."""

    def __init__(self, inner, params: MavParams, delay: int = 2):
        self.inner = inner
        self.delay = delay
        self._hover = np.array([params.hover_throttle, 0.0, 0.0, 0.0])
        self._queue: list[np.ndarray] = []

    def reset(self) -> None:
        self._queue.clear()
        if hasattr(self.inner, "reset"):
            self.inner.reset()

    def act(self, env: VecEnv) -> np.ndarray:
        self._queue.append(np.asarray(self.inner.act(env)).reshape(env.n, 4))
        if len(self._queue) <= self.delay:
            return np.tile(self._hover, (env.n, 1))
        return self._queue.pop(0)


def make_controller(kind: str, params: MavParams, checkpoint: str | None = None, **kw):
    if kind == "policy":
        if checkpoint is None:
            raise ValueError("policy controller needs a checkpoint path")
        return PolicyController(load_policy(checkpoint), **kw)
    if kind == "se3":
        return Se3TaskController(params, **kw)
    if kind == "mpc":
        return MpcTaskController(params, **kw)
    raise ValueError(f"unknown controller kind {kind!r}")
