"""Measurement harness: yaw-sweep property curves, temporal smoothness,
circle-tracking MSE tables, flip scorecards, and Lipschitz certificates.

Everything here is read-only over frozen policies and logs, and
deterministic: the same inputs produce the same report bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MavState
from .env import VecEnv, EpisodeConfig, build_observation
from .logs import TrajectoryWriter, read_trajectory, rotations_from_log
from .params import MavParams
from .policy import PolicyNet, lipschitz_bound, max_singular_value
from .rotations import unwrap_step_batch, yaw_rotation
from .tasks import TaskSpec, make_task


# --- generic closed-loop rollout -------------------------------------------------


def simulate(
    controller,
    env: VecEnv,
    steps: int,
    log_path: str | None = None,
    log_env: int = 0,
    on_done: str = "raise",
) -> dict[str, np.ndarray]:
    """Run a controller on a (usually 1-env) environment.  A scripted
    evaluation owns its duration, so any episode end before `steps` is a
    crash: raised by default, or recorded (`on_done="stop"`, log truncated
    with `crashed` set) for protocols that score failures."""
    writer = TrajectoryWriter(log_path) if log_path else None
    recs: dict[str, list] = {k: [] for k in ("t", "p", "v", "r", "w", "action", "reward")}
    crashed = False
    try:
        for _ in range(steps):
            action = np.asarray(controller.act(env)).reshape(env.n, 4)
            obs, reward, done, info = env.step(action)
            if np.any(info["fault"]):
                raise RuntimeError("simulation diverged (non-finite state)")
            if bool(done[log_env]):
                if on_done == "raise":
                    raise RuntimeError(
                        f"episode ended at t={float(env.state.t[log_env]):.2f}s "
                        "during a scripted evaluation"
                    )
                crashed = True
                break
            i = log_env
            recs["t"].append(env.state.t[i])
            recs["p"].append(env.state.p[i].copy())
            recs["v"].append(env.state.v[i].copy())
            recs["r"].append(env.state.r[i].copy())
            recs["w"].append(env.state.w[i].copy())
            recs["action"].append(action[i].copy())
            recs["reward"].append(reward[i])
            if writer:
                writer.append(env, i, action[i], reward[i], info["reward_terms"][i])
    finally:
        if writer:
            writer.close()
    out = {k: np.asarray(v) for k, v in recs.items()}
    out["crashed"] = np.array(crashed)
    return out


def hover_env(
    task: str,
    params: MavParams | None = None,
    seed: int = 0,
    n: int = 1,
    randomize: bool = False,
    obs_mode: str = "mat",
    start_offset: np.ndarray | None = None,
) -> VecEnv:
    """A quiet env for scripted evaluations: nominal hover start at the
    target (plus an optional offset), no training command events."""
    # scripted evaluations own their duration; never clock-terminate
    episode = EpisodeConfig(randomize_params=randomize, max_steps=10**9)
    env = VecEnv(
        n, task=task, params=params, episode=episode, obs_mode=obs_mode,
        seed=seed, training_events=False,
    )
    env.curriculum = 1.0 if randomize else 0.0
    env.reset_all()
    p = env.params
    env.state.p[:] = env.target_p
    if start_offset is not None:
        env.state.p[:] += np.asarray(start_offset)
    env.state.v[:] = 0.0
    env.state.w[:] = 0.0
    env.state.r[:] = np.eye(3)
    env.state.motor[:] = np.sqrt(p.hover_thrust / (4.0 * p.k_force))
    env.state.voltage[:] = p.v_nominal
    env.state.t[:] = 0.0
    env.roll_prev[:] = 0.0
    env.flip_done[:] = 0.0
    env.flip_total[:] = 0.0
    env.speed[:] = 0.0
    env.steps[:] = 0
    env.prev_action[:] = 0.0
    env.prev_action[:, 0] = p.hover_throttle
    if hasattr(env, "_vterm"):
        env._vterm[:] = p.v_nominal
    return env


# --- yaw sweep (policy property curves) -------------------------------------------


@dataclass
class SweepResult:
    yaw: np.ndarray            # grid, symmetric about 0, radians
    actions: np.ndarray        # per grid point: throttle + 3 rates
    spatial_slope: float       # max |d omega_z / d yaw| across the grid
    independence: float        # max(|omega_x|, |omega_y|)
    symmetry: float            # max |omega_z(yaw) + omega_z(-yaw)|
    endpoint_gap: float        # |omega_z(pi - d) - omega_z(-pi + d)|
    endpoint_signs: tuple[float, float]
    label: str = ""

    def save(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"yaw_sweep_{self.label or 'controller'}.csv")
        with open(path, "w") as fh:
            fh.write("yaw,throttle,wx,wy,wz\n")
            for y, a in zip(self.yaw, self.actions):
                fh.write(f"{y:.9g},{a[0]:.9g},{a[1]:.9g},{a[2]:.9g},{a[3]:.9g}\n")
        summary = os.path.join(out_dir, f"yaw_sweep_{self.label or 'controller'}.txt")
        with open(summary, "w") as fh:
            fh.write(
                f"label {self.label}\n"
                f"spatial_slope {self.spatial_slope:.6f}\n"
                f"independence {self.independence:.6f}\n"
                f"symmetry {self.symmetry:.6f}\n"
                f"endpoint_gap {self.endpoint_gap:.6f}\n"
                f"endpoint_signs {self.endpoint_signs[0]:.6f} {self.endpoint_signs[1]:.6f}\n"
            )
        return path


def sweep_states(params: MavParams, grid: np.ndarray, altitude: float = 3.0):
    """Vehicle parked at the target with its yaw swept across the grid."""
    hover_motor = np.sqrt(params.hover_thrust / (4.0 * params.k_force))
    for psi in grid:
        yield MavState(
            p=np.array([0.0, 0.0, altitude]),
            v=np.zeros(3),
            r=yaw_rotation(float(psi)),
            w=np.zeros(3),
            motor=np.full(4, hover_motor),
            voltage=params.v_nominal,
        )


def yaw_sweep_policy(
    policy: PolicyNet, params: MavParams, n_grid: int = 361, label: str = ""
) -> SweepResult:
    grid = np.linspace(-np.pi, np.pi, n_grid)
    task = make_task("pos")
    prev = np.concatenate([[params.hover_throttle], np.zeros(3)])
    acts = np.stack(
        [
            policy.forward(build_observation(s, task, prev, policy.obs_mode, params))
            for s in sweep_states(params, grid)
        ]
    )
    return _sweep_metrics(grid, acts, label)


def yaw_sweep_se3(params: MavParams, n_grid: int = 361, label: str = "se3") -> SweepResult:
    from .baselines import Se3Controller

    grid = np.linspace(-np.pi, np.pi, n_grid)
    ctl = Se3Controller(params)
    acts = np.stack(
        [
            ctl.control(s, np.array([0.0, 0.0, 3.0]), yaw_des=0.0).as_array()
            for s in sweep_states(params, grid)
        ]
    )
    return _sweep_metrics(grid, acts, label)


def _sweep_metrics(grid: np.ndarray, acts: np.ndarray, label: str) -> SweepResult:
    wz = acts[:, 3]
    dpsi = grid[1] - grid[0]
    slope = float(np.max(np.abs(np.diff(wz))) / dpsi)
    independence = float(np.max(np.abs(acts[:, 1:3])))
    # grid is symmetric: pair yaw with -yaw by reversal
    symmetry = float(np.max(np.abs(wz + wz[::-1])))
    endpoint_gap = float(abs(wz[-2] - wz[1]))
    return SweepResult(
        yaw=grid,
        actions=acts,
        spatial_slope=slope,
        independence=independence,
        symmetry=symmetry,
        endpoint_gap=endpoint_gap,
        endpoint_signs=(float(wz[1]), float(wz[-2])),
        label=label,
    )


# --- temporal smoothness ------------------------------------------------------------


def temporal_smoothness(series: np.ndarray) -> float:
    """Mean squared first difference of a uniformly sampled series."""
    series = np.asarray(series, dtype=float)
    if series.size < 2:
        raise ValueError("series must hold at least two samples")
    return float(np.mean(np.diff(series) ** 2))


def hover_throttle_series(
    policy: PolicyNet,
    params: MavParams,
    steps: int = 500,
    seed: int = 0,
    noise: dict | None = None,
    offset: np.ndarray | None = None,
) -> np.ndarray:
    """Deterministic hover rollout under paired-seed sensor noise; returns the
    commanded throttle series (the temporal-smoothness scenario)."""
    from .controllers import PolicyController

    env = hover_env(
        "pos", params=params, seed=seed, obs_mode=policy.obs_mode,
        start_offset=offset if offset is not None else np.array([0.5, -0.4, -0.3]),
    )
    ctl = PolicyController(policy, noise=noise, seed=seed + 1)
    out = simulate(ctl, env, steps)
    return out["action"][:, 0]


# --- circle tracking -----------------------------------------------------------------


def tracking_mse(
    log: dict[str, np.ndarray],
    radius: float,
    speed: float,
    window: tuple[float, float] = (5.0, 25.0),
    center: np.ndarray | None = None,
) -> tuple[float, float]:
    """Radius and signed-tangential-velocity MSE over a settled window."""
    t = log["t"]
    lo, hi = window
    if hi > t[-1] + 1e-9:
        raise ValueError(f"window {window} extends past the log end {t[-1]:.2f}")
    sel = (t >= lo) & (t <= hi)
    cx, cy = (0.0, 0.0) if center is None else (center[0], center[1])
    dx, dy = log["px"][sel] - cx, log["py"][sel] - cy
    dist = np.hypot(dx, dy)
    radius_mse = float(np.mean((dist - radius) ** 2))
    safe = np.maximum(dist, 1e-9)
    tang_x, tang_y = -dy / safe, dx / safe
    v_perp = log["vx"][sel] * tang_x + log["vy"][sel] * tang_y
    velocity_mse = float(np.mean((v_perp - speed) ** 2))
    return radius_mse, velocity_mse


# --- flip scorecard ------------------------------------------------------------------


@dataclass
class FlipReport:
    flips: int
    out_of_plane: float        # max |x - x0|, m
    altitude_dev: float        # max |z - z0|, m
    durations: list[float]     # seconds per completed rotation
    tiltage: np.ndarray        # world-z component of body z per step

    def summary(self) -> str:
        durs = " ".join(f"{d:.3f}" for d in self.durations)
        return (
            f"flips {self.flips}\nout_of_plane {self.out_of_plane:.4f}\n"
            f"altitude_dev {self.altitude_dev:.4f}\ndurations {durs}\n"
            f"tiltage_min {self.tiltage.min():.4f}\n"
        )


def flip_scorecard(log: dict[str, np.ndarray]) -> FlipReport:
    rots = rotations_from_log(log)
    roll = np.arctan2(rots[:, 2, 1], rots[:, 2, 2])
    inc = unwrap_step_batch(roll[:-1], roll[1:])
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    tiltage = rots[:, 2, 2]

    total = cum[-1] - cum[0]
    flips = int(np.floor(abs(total) / (2.0 * np.pi) + 1e-9))
    durations = []
    t = log["t"]
    sign = 1.0 if total >= 0 else -1.0
    for k in range(1, flips + 1):
        crossed = np.flatnonzero(sign * cum >= 2.0 * np.pi * k - 1e-9)
        started = np.flatnonzero(sign * cum >= 2.0 * np.pi * (k - 1) + 1e-9)
        if len(crossed) and len(started):
            durations.append(float(t[crossed[0]] - t[started[0]]))
    return FlipReport(
        flips=flips,
        out_of_plane=float(np.max(np.abs(log["px"] - log["px"][0]))),
        altitude_dev=float(np.max(np.abs(log["pz"] - log["pz"][0]))),
        durations=durations,
        tiltage=tiltage,
    )


# --- Lipschitz certificate ------------------------------------------------------------


@dataclass
class CertificateReport:
    bound: float
    max_quotient: float
    pairs: int
    passed: bool

    def summary(self) -> str:
        return (
            f"bound {self.bound:.6f}\nmax_quotient {self.max_quotient:.6f}\n"
            f"pairs {self.pairs}\nresult {'PASS' if self.passed else 'FAIL'}\n"
        )


def _plausible_obs(policy: PolicyNet, rng: np.random.Generator, n: int) -> np.ndarray:
    """Random states spanning the task envelope (positions to 5 m, attitudes
    anywhere, speeds to 10 m/s, rates to 20 rad/s, live battery range)."""
    from .rotations import random_rotation, mat_to_quat

    att_dim = 9 if policy.obs_mode == "mat" else 4
    out = np.zeros((n, policy.obs_dim))
    out[:, 0:3] = rng.uniform(-5, 5, (n, 3))
    for i in range(n):
        r = random_rotation(rng)
        out[i, 3 : 3 + att_dim] = r.reshape(9) if att_dim == 9 else mat_to_quat(r)
    i0 = 3 + att_dim
    out[:, i0] = rng.choice([-1.0, 0.0, 1.0], n)
    out[:, i0 + 1] = rng.uniform(-2 * np.pi, 2 * np.pi, n)
    out[:, i0 + 2 : i0 + 5] = rng.uniform(-10, 10, (n, 3))
    out[:, i0 + 5 : i0 + 8] = rng.uniform(-20, 20, (n, 3))
    out[:, i0 + 8] = rng.uniform(0, 5, n)
    out[:, i0 + 9] = rng.uniform(19.2, 25.2, n)
    out[:, i0 + 10] = rng.uniform(0, 1000, n)
    out[:, i0 + 11 : i0 + 14] = rng.uniform(-20, 20, (n, 3))
    return out


def lipschitz_certificate(
    policy: PolicyNet, pairs: int = 10_000, seed: int = 0
) -> CertificateReport:
    rng = np.random.default_rng(seed)
    bound = lipschitz_bound(policy)
    half = pairs // 2
    s1 = _plausible_obs(policy, rng, pairs)
    s2 = np.empty_like(s1)
    s2[:half] = _plausible_obs(policy, rng, half)
    # adjacent pairs: small perturbations probe the local gradient
    s2[half:] = s1[half:] + rng.normal(0.0, 1e-3, (pairs - half, policy.obs_dim))
    a1 = policy.forward(s1)
    a2 = policy.forward(s2)
    num = np.linalg.norm(a1 - a2, axis=1)
    den = np.linalg.norm(s1 - s2, axis=1)
    ok = den > 0
    quotients = num[ok] / den[ok]
    max_q = float(np.max(quotients))
    return CertificateReport(bound=bound, max_quotient=max_q, pairs=int(ok.sum()), passed=max_q <= bound)


# --- task-level evaluation (the desk-scale gates) ---------------------------------------


def eval_hover(
    policy: PolicyNet,
    params: MavParams | None = None,
    n: int = 256,
    steps: int = 500,
    tail: int = 100,
    seed: int = 123,
) -> dict:
    """Deterministic policy from fully randomized starts; mean position and
    attitude error over the settled tail, dead envs excluded but counted."""
    params = params or MavParams()
    env = VecEnv(
        n, task="pos", params=params, obs_mode=policy.obs_mode,
        seed=seed, training_events=False,
    )
    env.curriculum = 1.0
    obs = env.reset_all()
    alive = np.ones(n, dtype=bool)
    pos_errs, att_errs = [], []
    for k in range(steps):
        obs, _, done, _ = env.step(policy.forward(obs))
        alive &= ~done
        if k >= steps - tail:
            p_rel = env.target_p - env.state.p
            tr = np.einsum("nji,nji->n", env.state.r, env.target_r)
            ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
            pos_errs.append(np.linalg.norm(p_rel, axis=1)[alive])
            att_errs.append(np.degrees(ang)[alive])
    return {
        "pos_err": float(np.mean(np.concatenate(pos_errs))),
        "att_err_deg": float(np.mean(np.concatenate(att_errs))),
        "alive_frac": float(alive.mean()),
    }


def eval_circle(
    controller,
    v_star: float,
    params: MavParams | None = None,
    radius: float = 1.2,
    seconds: float = 30.0,
    seed: int = 0,
    randomize: bool = False,
    log_path: str | None = None,
    window: tuple[float, float] = (5.0, 25.0),
) -> dict:
    """Spin up on the ring at the commanded speed and measure the settled
    tracking MSEs (the Table-I protocol)."""
    params = params or MavParams()
    env = hover_env("circle", params=params, seed=seed, randomize=randomize)
    env.radius[:] = radius
    env.speed[:] = v_star
    # start on the ring, heading to the center, at rest
    env.state.p[0, 0] = env.target_p[0, 0] + radius
    env.state.r[0] = yaw_rotation(np.pi)
    env.roll_prev[0] = 0.0
    if hasattr(controller, "reset"):
        controller.reset()
    steps = int(seconds * 100)
    log = simulate(controller, env, steps, log_path=log_path, on_done="stop")
    if bool(log["crashed"]):
        # falling out of the task is the worst possible tracking outcome
        return {"radius_mse": float("inf"), "velocity_mse": float("inf"), "crashed": True}
    r_mse, v_mse = tracking_mse(
        {
            "t": log["t"],
            "px": log["p"][:, 0], "py": log["p"][:, 1],
            "vx": log["v"][:, 0], "vy": log["v"][:, 1],
        },
        radius, v_star, window=window, center=env.target_p[0],
    )
    return {"radius_mse": r_mse, "velocity_mse": v_mse, "crashed": False}


def eval_flips(
    policy: PolicyNet,
    n_flips: int = 3,
    params: MavParams | None = None,
    seed: int = 0,
    settle_steps: int = 200,
    spacing: int = 100,
    log_path: str | None = None,
) -> FlipReport:
    """Hover, then issue consecutive single-flip commands and score the
    resulting rotations."""
    from .controllers import PolicyController

    params = params or MavParams()
    env = hover_env("flip", params=params, seed=seed, obs_mode=policy.obs_mode)
    ctl = PolicyController(policy)
    recs = {"t": [], "px": [], "pz": [], "r": []}
    writer = TrajectoryWriter(log_path) if log_path else None
    total = settle_steps + n_flips * spacing + 300
    start = None
    for k in range(total):
        if k >= settle_steps and (k - settle_steps) % spacing == 0:
            if (k - settle_steps) // spacing < n_flips:
                env.trigger_flip(0)
                if start is None:
                    start = k
        action = ctl.act(env)
        _, reward, done, info = env.step(action)
        if done[0]:
            break
        if start is not None:
            recs["t"].append(env.state.t[0])
            recs["px"].append(env.state.p[0, 0])
            recs["pz"].append(env.state.p[0, 2])
            recs["r"].append(env.state.r[0].copy())
        if writer:
            writer.append(env, 0, action[0], reward[0], info["reward_terms"][0])
    if writer:
        writer.close()
    rots = np.asarray(recs["r"])
    log = {
        "t": np.asarray(recs["t"]),
        "px": np.asarray(recs["px"]),
        "pz": np.asarray(recs["pz"]),
    }
    for i in range(3):
        for j in range(3):
            log[f"r{i}{j}"] = rots[:, i, j]
    return flip_scorecard(log)
