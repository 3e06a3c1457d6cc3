"""On-policy actor-critic training over the vectorized environment.

Clipped-surrogate policy gradient with generalized advantage estimation,
asymmetric observations (noisy actor / privileged critic), curriculum-scaled
randomization, and a spectral projection of the policy after every optimizer
step.  Single-threaded and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .env import VecEnv, EpisodeConfig, apply_obs_noise
from .params import MavParams
from .policy import CriticNet, Mlp, PolicyNet, aligned_array, load_policy, save_policy, spectral_project


@dataclass
class TrainConfig:
    task: str = "pos"
    obs_mode: str = "mat"
    k_lip: float | None = 1.5
    envs: int = 256
    horizon: int = 64
    epochs: int = 4
    minibatches: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    lr: float = 3e-4
    lr_final_frac: float = 0.05     # linear anneal endpoint
    entropy_coef: float = 1e-4
    max_grad_norm: float = 0.5
    updates: int = 600
    curriculum_frac: float = 0.6    # fraction of updates over which ranges ramp
    seed: int = 0
    hidden: tuple[int, ...] = (128, 128, 128)
    log_std_init: float = -1.2
    checkpoint_every: int = 200
    backend: str | None = None
    # actor observation noise (1-sigma)
    noise_pos: float = 0.005        # m
    noise_att: float = 0.5 * np.pi / 180.0
    noise_vel: float = 0.02         # m/s
    noise_rate: float = 0.05        # rad/s
    noise_volt: float = 0.05        # V

    def noise_scales(self) -> dict[str, float]:
        return {
            "pos": self.noise_pos,
            "att": self.noise_att,
            "vel": self.noise_vel,
            "rate": self.noise_rate,
            "volt": self.noise_volt,
        }

    def to_json(self) -> str:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.b1**self.t
        b2t = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, t: int, m: list[np.ndarray], v: list[np.ndarray]) -> None:
        self.t = t
        for dst, src in zip(self.m, m):
            dst[...] = src
        for dst, src in zip(self.v, v):
            dst[...] = src


@dataclass
class RolloutBuffer:
    """horizon x envs transition arrays; actor obs carry sensor noise, critic
    obs are the privileged ground truth."""

    actor_obs: np.ndarray
    critic_obs: np.ndarray
    action_u: np.ndarray       # normalized pre-scale samples
    log_prob: np.ndarray
    reward: np.ndarray         # includes bootstrap bonus on time-limit ends
    done: np.ndarray
    value: np.ndarray
    last_value: np.ndarray

    @property
    def horizon(self) -> int:
        return self.actor_obs.shape[0]


def collect_rollouts(
    policy: PolicyNet,
    critic: CriticNet,
    env: VecEnv,
    cfg: TrainConfig,
    rng: np.random.Generator,
    obs: np.ndarray,
) -> tuple[RolloutBuffer, np.ndarray]:
    """Run `horizon` policy steps; returns the buffer and the observation to
    resume from."""
    t_steps, n = cfg.horizon, env.n
    scales = cfg.noise_scales()
    buf = RolloutBuffer(
        actor_obs=np.zeros((t_steps, n, policy.obs_dim)),
        critic_obs=np.zeros((t_steps, n, critic.k_in.shape[0])),
        action_u=np.zeros((t_steps, n, 4)),
        log_prob=np.zeros((t_steps, n)),
        reward=np.zeros((t_steps, n)),
        done=np.zeros((t_steps, n), dtype=bool),
        value=np.zeros((t_steps, n)),
        last_value=np.zeros(n),
    )
    critic_obs = env.critic_observations()
    for t in range(t_steps):
        actor_obs = apply_obs_noise(obs, policy.obs_mode, scales, rng)
        action, logp, u = policy.sample(actor_obs, rng)
        value = critic.value(critic_obs)

        next_obs, reward, done, info = env.step(action)

        timeout = info["timeout"]
        if np.any(timeout):
            # episodes cut by the clock bootstrap from the terminal value
            term_v = critic.value(info["terminal_critic_obs"][timeout])
            reward = reward.copy()
            reward[timeout] += cfg.gamma * term_v

        buf.actor_obs[t] = actor_obs
        buf.critic_obs[t] = critic_obs
        buf.action_u[t] = u
        buf.log_prob[t] = logp
        buf.reward[t] = reward
        buf.done[t] = done
        buf.value[t] = value
        obs = next_obs
        critic_obs = info["critic_obs"]
    buf.last_value = critic.value(critic_obs)
    return buf, obs


def compute_gae(
    buf: RolloutBuffer, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Masked recursion; advantages are normalized by the caller."""
    t_steps, n = buf.reward.shape
    adv = np.zeros((t_steps, n))
    last = np.zeros(n)
    next_value = buf.last_value
    for t in range(t_steps - 1, -1, -1):
        mask = 1.0 - buf.done[t].astype(float)
        delta = buf.reward[t] + gamma * next_value * mask - buf.value[t]
        last = delta + gamma * lam * mask * last
        adv[t] = last
        next_value = buf.value[t]
    returns = adv + buf.value
    return adv, returns


def _global_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def ppo_update(
    policy: PolicyNet,
    critic: CriticNet,
    opt_policy: Adam,
    opt_critic: Adam,
    buf: RolloutBuffer,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> dict:
    """Minibatched clipped-surrogate epochs; the spectral projection runs
    after every optimizer step, never only at save time."""
    t_steps, n = buf.reward.shape
    batch = t_steps * n
    adv, returns = compute_gae(buf, cfg.gamma, cfg.gae_lambda)
    adv = adv.reshape(batch)
    adv = (adv - adv.mean()) / max(float(adv.std()), 1e-8)
    returns = returns.reshape(batch)
    obs = buf.actor_obs.reshape(batch, -1)
    cobs = buf.critic_obs.reshape(batch, -1)
    u_old = buf.action_u.reshape(batch, 4)
    logp_old = buf.log_prob.reshape(batch)

    pg_losses, v_losses, kls = [], [], []
    sigmas: list[float] = []
    std = None
    for _ in range(cfg.epochs):
        order = rng.permutation(batch)
        for mb in np.array_split(order, cfg.minibatches):
            mb_adv = adv[mb]
            cache: list = []
            u_mean = policy.mean_norm(obs[mb], cache)
            logp = policy.log_prob_norm(u_mean, u_old[mb])
            ratio = np.exp(logp - logp_old[mb])
            surr1 = ratio * mb_adv
            surr2 = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * mb_adv
            pg_loss = -np.minimum(surr1, surr2).mean()

            # d(pg_loss)/d(logp): active only where the unclipped branch wins
            use = (surr1 <= surr2).astype(float)
            dlogp = -(mb_adv * ratio * use) / len(mb)

            std = np.exp(policy.log_std)
            z = (u_old[mb] - u_mean) / std
            du_mean = dlogp[:, None] * z / std           # d logp/d u_mean = z/std
            grads = policy.backward(cache, du_mean)

            dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0)
            dlog_std -= cfg.entropy_coef                  # entropy bonus
            flat = []
            for dw, db in grads:
                flat.extend([dw, db])
            flat.append(dlog_std)

            gnorm = _global_norm(flat)
            if cfg.max_grad_norm and gnorm > cfg.max_grad_norm:
                scale = cfg.max_grad_norm / gnorm
                flat = [g * scale for g in flat]
            if np.isfinite(gnorm):
                opt_policy.step(flat)
                sigmas = spectral_project(policy)

            ccache: list = []
            v = critic.value(cobs[mb], ccache)
            v_err = v - returns[mb]
            v_loss = 0.5 * float(np.mean(v_err**2))
            cgrads = critic.backward(ccache, v_err / len(mb))
            cflat = []
            for dw, db in cgrads:
                cflat.extend([dw, db])
            cnorm = _global_norm(cflat)
            if cfg.max_grad_norm and cnorm > cfg.max_grad_norm * 10.0:
                cflat = [g * (cfg.max_grad_norm * 10.0 / cnorm) for g in cflat]
            if np.isfinite(cnorm):
                opt_critic.step(cflat)

            pg_losses.append(pg_loss)
            v_losses.append(v_loss)
            kls.append(float(np.mean(logp_old[mb] - logp)))

    return {
        "pg_loss": float(np.mean(pg_losses)),
        "v_loss": float(np.mean(v_losses)),
        "kl": float(np.mean(kls)),
        "sigmas": sigmas,
        "std": [float(s) for s in (std if std is not None else np.exp(policy.log_std))],
    }


class Trainer:
    """Owns the env, nets, optimizers, and rng streams; loops collect/update,
    advances the curriculum, logs metrics, and writes resumable checkpoints."""

    def __init__(
        self,
        cfg: TrainConfig,
        out_dir: str,
        params: MavParams | None = None,
        episode: EpisodeConfig | None = None,
    ):
        self.cfg = cfg
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.params = params or MavParams()
        self.env = VecEnv(
            cfg.envs,
            task=cfg.task,
            params=self.params,
            episode=episode,
            obs_mode=cfg.obs_mode,
            seed=cfg.seed,
            backend=cfg.backend,
        )
        self.policy = PolicyNet.create(
            obs_mode=cfg.obs_mode,
            hidden=cfg.hidden,
            k_lip=cfg.k_lip,
            seed=cfg.seed,
            log_std_init=cfg.log_std_init,
            hover_throttle=self.params.hover_throttle,
        )
        self.critic = CriticNet.create(hidden=cfg.hidden, seed=cfg.seed + 1)
        self.opt_policy = Adam(self.policy.parameters(), cfg.lr)
        self.opt_critic = Adam(self.critic.parameters(), cfg.lr)
        self.rng = np.random.default_rng(cfg.seed + 2)
        self.update_idx = 0
        self.obs = self.env.reset_all()
        self.metrics_path = os.path.join(out_dir, "metrics.csv")
        with open(os.path.join(out_dir, "config.json"), "w") as fh:
            fh.write(cfg.to_json() + "\n")

    def curriculum_level(self, update: int) -> float:
        ramp = max(1, int(self.cfg.curriculum_frac * self.cfg.updates))
        return min(1.0, update / ramp)

    def _metrics_header(self) -> str:
        n_layers = self.policy.mlp.n_layers
        sig = ",".join(f"sigma_{i}" for i in range(n_layers))
        return f"update,mean_return,mean_length,curriculum,kl,pg_loss,v_loss,{sig}\n"

    def train(self, updates: int | None = None, log_every: int = 10) -> str:
        cfg = self.cfg
        total = cfg.updates if updates is None else self.update_idx + updates
        if not os.path.exists(self.metrics_path):
            with open(self.metrics_path, "w") as fh:
                fh.write(self._metrics_header())
        t0 = time.time()
        while self.update_idx < total:
            self.env.curriculum = self.curriculum_level(self.update_idx)
            frac = self.update_idx / max(1, cfg.updates)
            lr = cfg.lr * max(cfg.lr_final_frac, 1.0 - frac)
            self.opt_policy.lr = lr
            self.opt_critic.lr = lr
            buf, self.obs = collect_rollouts(
                self.policy, self.critic, self.env, cfg, self.rng, self.obs
            )
            stats = ppo_update(
                self.policy, self.critic, self.opt_policy, self.opt_critic, buf, cfg, self.rng
            )
            self.update_idx += 1

            episodes = self.env.pop_episode_stats()
            if episodes:
                mean_ret = float(np.mean([e[0] for e in episodes]))
                mean_len = float(np.mean([e[1] for e in episodes]))
            else:
                mean_ret, mean_len = float("nan"), float("nan")
            row = (
                f"{self.update_idx},{mean_ret:.4f},{mean_len:.1f},"
                f"{self.env.curriculum:.3f},{stats['kl']:.5f},"
                f"{stats['pg_loss']:.5f},{stats['v_loss']:.5f},"
                + ",".join(f"{s:.6f}" for s in stats["sigmas"])
            )
            with open(self.metrics_path, "a") as fh:
                fh.write(row + "\n")
            if log_every and self.update_idx % log_every == 0:
                el = time.time() - t0
                print(
                    f"[{self.update_idx}/{total}] return={mean_ret:.2f} "
                    f"len={mean_len:.0f} kl={stats['kl']:.4f} "
                    f"cur={self.env.curriculum:.2f} ({el:.0f}s)",
                    flush=True,
                )
            if cfg.checkpoint_every and self.update_idx % cfg.checkpoint_every == 0:
                self.save(tag=f"update{self.update_idx:06d}")
        final = self.save(tag="final")
        return final

    # --- checkpointing -------------------------------------------------------

    def save(self, tag: str) -> str:
        """Writes <out>/policy_<tag>.json plus a binary trainer state capable
        of resuming bit-exactly."""
        path = os.path.join(self.out_dir, f"policy_{tag}.json")
        save_policy(self.policy, path)
        state_path = os.path.join(self.out_dir, f"state_{tag}.npz")
        env = self.env
        arrays = {
            "update_idx": np.array(self.update_idx),
            "obs": self.obs,
            "env_p": env.state.p, "env_v": env.state.v, "env_r": env.state.r,
            "env_w": env.state.w, "env_motor": env.state.motor,
            "env_voltage": env.state.voltage, "env_t": env.state.t,
            "env_flag": env.flag, "env_target_p": env.target_p,
            "env_target_yaw": env.target_yaw, "env_target_r": env.target_r,
            "env_radius": env.radius, "env_speed": env.speed,
            "env_flip_total": env.flip_total, "env_flip_done": env.flip_done,
            "env_roll_prev": env.roll_prev, "env_radial_mem": env.radial_mem,
            "env_prev_action": env.prev_action, "env_steps": env.steps,
            "env_ep_return": env._ep_return,
            "env_vterm": getattr(env, "_vterm", env.state.voltage),
            "vp_mass": env.vp.mass, "vp_inertia": env.vp.inertia,
            "vp_inertia_inv": env.vp.inertia_inv, "vp_drag": env.vp.drag,
            "vp_k_force": env.vp.k_force, "vp_k_torque": env.vp.k_torque,
            "vp_k_motor": env.vp.k_motor, "vp_poly_a0": env.vp.poly_a0,
            "vp_poly_a1": env.vp.poly_a1,
            "log_std": self.policy.log_std,
        }
        for i, (w, b) in enumerate(zip(self.critic.mlp.weights, self.critic.mlp.biases)):
            arrays[f"critic_w{i}"] = w
            arrays[f"critic_b{i}"] = b
        for name, opt in (("op", self.opt_policy), ("oc", self.opt_critic)):
            arrays[f"{name}_t"] = np.array(opt.t)
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                arrays[f"{name}_m{i}"] = m
                arrays[f"{name}_v{i}"] = v
        np.savez(state_path, **arrays)
        rng_path = os.path.join(self.out_dir, f"rng_{tag}.json")
        with open(rng_path, "w") as fh:
            json.dump(
                {"trainer": self.rng.bit_generator.state, "env": env.rng.bit_generator.state},
                fh,
            )
        return path

    def resume(self, tag: str) -> None:
        path = os.path.join(self.out_dir, f"policy_{tag}.json")
        self.policy = load_policy(path)
        self.opt_policy = Adam(self.policy.parameters(), self.cfg.lr)
        data = np.load(os.path.join(self.out_dir, f"state_{tag}.npz"))
        self.update_idx = int(data["update_idx"])
        self.obs = data["obs"]
        env = self.env
        env.state.p[...] = data["env_p"]; env.state.v[...] = data["env_v"]
        env.state.r[...] = data["env_r"]; env.state.w[...] = data["env_w"]
        env.state.motor[...] = data["env_motor"]
        env.state.voltage[...] = data["env_voltage"]; env.state.t[...] = data["env_t"]
        env.flag[...] = data["env_flag"]; env.target_p[...] = data["env_target_p"]
        env.target_yaw[...] = data["env_target_yaw"]; env.target_r[...] = data["env_target_r"]
        env.radius[...] = data["env_radius"]; env.speed[...] = data["env_speed"]
        env.flip_total[...] = data["env_flip_total"]; env.flip_done[...] = data["env_flip_done"]
        env.roll_prev[...] = data["env_roll_prev"]; env.radial_mem[...] = data["env_radial_mem"]
        env.prev_action[...] = data["env_prev_action"]; env.steps[...] = data["env_steps"]
        env._ep_return[...] = data["env_ep_return"]
        env._vterm = data["env_vterm"].copy()
        env.vp.mass[...] = data["vp_mass"]; env.vp.inertia[...] = data["vp_inertia"]
        env.vp.inertia_inv[...] = data["vp_inertia_inv"]; env.vp.drag[...] = data["vp_drag"]
        env.vp.k_force[...] = data["vp_k_force"]; env.vp.k_torque[...] = data["vp_k_torque"]
        env.vp.k_motor[...] = data["vp_k_motor"]; env.vp.poly_a0[...] = data["vp_poly_a0"]
        env.vp.poly_a1[...] = data["vp_poly_a1"]
        self.policy.log_std[...] = data["log_std"]
        for i in range(self.critic.mlp.n_layers):
            self.critic.mlp.weights[i][...] = data[f"critic_w{i}"]
            self.critic.mlp.biases[i][...] = data[f"critic_b{i}"]
        self.opt_policy.load_state(
            int(data["op_t"]),
            [data[f"op_m{i}"] for i in range(len(self.opt_policy.params))],
            [data[f"op_v{i}"] for i in range(len(self.opt_policy.params))],
        )
        self.opt_critic.load_state(
            int(data["oc_t"]),
            [data[f"oc_m{i}"] for i in range(len(self.opt_critic.params))],
            [data[f"oc_v{i}"] for i in range(len(self.opt_critic.params))],
        )
        with open(os.path.join(self.out_dir, f"rng_{tag}.json")) as fh:
            rng_states = json.load(fh)
        self.rng.bit_generator.state = rng_states["trainer"]
        env.rng.bit_generator.state = rng_states["env"]


def train(cfg: TrainConfig, out_dir: str, **kwargs) -> str:
    return Trainer(cfg, out_dir, **kwargs).train()
