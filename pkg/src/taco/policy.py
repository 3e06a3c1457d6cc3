"""Lipschitz-constrained Gaussian policy and the privileged critic.

The policy is a rectifier MLP with a tanh output head, elementwise input
rescaling, and elementwise output rescaling onto the action ranges.  After
every optimizer update each weight matrix is projected so its largest
singular value stays within the configured budget; the product of per-layer
budgets times the scaling norms is then a certified bound on the network's
input-output difference quotient.

Implemented directly on numpy arrays with handwritten backprop: the nets are
tiny and this keeps training bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .env import CRITIC_DIM, OBS_DIM
from .params import RATE_MAX, THROTTLE_MAX, V_NOMINAL

CHECKPOINT_FORMAT = "taco-policy"
CHECKPOINT_VERSION = 1
DEFAULT_HIDDEN = (128, 128, 128)


class CheckpointError(RuntimeError):
    pass


def default_input_scale(mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise scale/shift bringing every observation entry to O(1)."""
    att = 9 if mode == "mat" else 4
    k_in = np.concatenate(
        [
            np.full(3, 1 / 5.0),        # relative position, m
            np.ones(att),               # rotation entries already in [-1, 1]
            [1.0],                      # task flag in {-1, 0, 1}
            [1 / 5.0],                  # command (speed in m/s or clamped angle)
            np.full(3, 1 / 10.0),       # body velocity, m/s
            np.full(3, 1 / 20.0),       # body rates, rad/s
            [1 / 5.0],                  # altitude, m
            [1 / 6.0],                  # voltage about nominal
            [1 / 500.0],                # previous throttle about mid-range
            np.full(3, 1 / 20.0),       # previous rates
        ]
    )
    in_shift = np.zeros_like(k_in)
    in_shift[3 + att + 9] = V_NOMINAL   # voltage slot
    in_shift[3 + att + 10] = 500.0      # previous-throttle slot
    return k_in, in_shift


def default_output_scale() -> tuple[np.ndarray, np.ndarray]:
    k_out = np.array([THROTTLE_MAX / 2.0, RATE_MAX, RATE_MAX, RATE_MAX])
    out_shift = np.array([THROTTLE_MAX / 2.0, 0.0, 0.0, 0.0])
    return k_out, out_shift


def aligned_array(a) -> np.ndarray:
    """Copy into a 64-byte-aligned float64 buffer.

    BLAS kernels pick different (equally valid) code paths by operand
    alignment; pinning the weight buffers keeps forward() bit-reproducible
    across save/load cycles.
    """
    a = np.asarray(a, dtype=np.float64)
    buf = np.empty(a.size + 8, dtype=np.float64)
    off = (-buf.ctypes.data // 8) % 8
    out = buf[off : off + a.size].reshape(a.shape)
    out[...] = a
    return out


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.normal(size=shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return aligned_array(gain * q[: shape[0], : shape[1]])


@dataclass
class Mlp:
    """Affine layers with rectifier hidden activations; the head is linear
    (the policy applies tanh on top)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def create(
        cls, sizes: list[int], rng: np.random.Generator, out_gain: float = 0.01
    ) -> "Mlp":
        ws, bs = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = out_gain if i == len(sizes) - 2 else np.sqrt(2.0)
            ws.append(orthogonal(rng, (fan_out, fan_in), gain))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if cache is not None:
                cache.append(x)
            x = x @ w.T + b
            if i < self.n_layers - 1:
                x = np.maximum(x, 0.0)
        return x

    def backward(self, cache: list, dz: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """dz is the gradient at the linear head output; returns per-layer
        (dW, db) in layer order."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            x = cache[i]
            grads[i] = (dz.T @ x, dz.sum(axis=0))
            if i > 0:
                dx = dz @ self.weights[i]
                # rectifier gate: the cached input of layer i is the activated
                # output of layer i-1, zero exactly where the unit was off
                dz = dx * (x > 0.0)
        return grads

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PolicyNet:
    mlp: Mlp
    k_in: np.ndarray
    in_shift: np.ndarray
    k_out: np.ndarray
    out_shift: np.ndarray
    log_std: np.ndarray
    k_lip: float | None = None
    obs_mode: str = "mat"
    _pi_u: list = field(default_factory=list, repr=False)
    _pi_v: list = field(default_factory=list, repr=False)

    @classmethod
    def create(
        cls,
        obs_mode: str = "mat",
        hidden: tuple[int, ...] = DEFAULT_HIDDEN,
        k_lip: float | None = 1.5,
        seed: int = 0,
        log_std_init: float = -1.0,
        hover_throttle: float | None = None,
    ) -> "PolicyNet":
        rng = np.random.default_rng(seed)
        k_in, in_shift = default_input_scale(obs_mode)
        k_out, out_shift = default_output_scale()
        mlp = Mlp.create([len(k_in), *hidden, 4], rng)
        if hover_throttle is not None:
            # start the mean throttle at hover instead of mid-range
            mlp.biases[-1][0] = np.arctanh((hover_throttle - out_shift[0]) / k_out[0])
        net = cls(
            mlp=mlp,
            k_in=k_in,
            in_shift=in_shift,
            k_out=k_out,
            out_shift=out_shift,
            log_std=np.full(4, float(log_std_init)),
            k_lip=k_lip,
            obs_mode=obs_mode,
        )
        if k_lip is not None:
            spectral_project(net)
        return net

    @property
    def obs_dim(self) -> int:
        return len(self.k_in)

    def _check(self, obs: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.obs_dim:
            raise ValueError(
                f"observation has {obs.shape[1]} entries, policy expects {self.obs_dim}"
            )
        return obs

    def mean_norm(self, obs: np.ndarray, cache: list | None = None) -> np.ndarray:
        """Normalized mean in (-1, 1)^4 before output rescaling."""
        obs = self._check(obs)
        x = (obs - self.in_shift) * self.k_in
        z = self.mlp.forward(x, cache)
        u = np.tanh(z)
        if cache is not None:
            cache.append(u)
        return u

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Mean action in physical units (throttle, body rates)."""
        single = np.asarray(obs).ndim == 1
        a = self.out_shift + self.k_out * self.mean_norm(obs)
        return a[0] if single else a

    def backward(self, cache: list, du: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradient of a scalar loss wrt every layer, given dL/d(mean_norm)."""
        u = cache[-1]
        dz = du * (1.0 - u * u)
        return self.mlp.backward(cache[:-1], dz)

    # --- Gaussian head (diagonal, state-independent std, normalized space) ---

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        """Returns (action, log_prob, u_sample).  The Gaussian lives in the
        normalized pre-scale space; actions are then shifted/scaled (the env
        clamps at its boundaries)."""
        u_mean = self.mean_norm(obs)
        std = np.exp(self.log_std)
        eps = rng.standard_normal(u_mean.shape)
        u = u_mean + std * eps
        logp = self.log_prob_norm(u_mean, u)
        action = self.out_shift + self.k_out * u
        return action, logp, u

    def log_prob_norm(self, u_mean: np.ndarray, u: np.ndarray) -> np.ndarray:
        std = np.exp(self.log_std)
        z = (u - u_mean) / std
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(self.log_std) - 2.0 * LOG_2PI

    def log_prob(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        u = (np.atleast_2d(action) - self.out_shift) / self.k_out
        return self.log_prob_norm(self.mean_norm(obs), u)

    def entropy(self) -> float:
        return float(np.sum(self.log_std) + 2.0 * (1.0 + LOG_2PI))

    def parameters(self) -> list[np.ndarray]:
        return self.mlp.parameters() + [self.log_std]


@dataclass
class CriticNet:
    """Same architecture shape, scalar output, privileged 30-entry input,
    no spectral projection."""

    mlp: Mlp
    k_in: np.ndarray
    in_shift: np.ndarray

    @classmethod
    def create(
        cls, hidden: tuple[int, ...] = DEFAULT_HIDDEN, seed: int = 1
    ) -> "CriticNet":
        rng = np.random.default_rng(seed)
        k_pol, shift_pol = default_input_scale("mat")
        k_in = np.concatenate([k_pol, np.ones(4)])      # + normalized motor speeds
        in_shift = np.concatenate([shift_pol, np.zeros(4)])
        mlp = Mlp.create([CRITIC_DIM, *hidden, 1], rng, out_gain=1.0)
        return cls(mlp=mlp, k_in=k_in, in_shift=in_shift)

    def value(self, obs: np.ndarray, cache: list | None = None) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        x = (obs - self.in_shift) * self.k_in
        return self.mlp.forward(x, cache)[:, 0]

    def backward(self, cache: list, dv: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        return self.mlp.backward(cache, dv[:, None])

    def parameters(self) -> list[np.ndarray]:
        return self.mlp.parameters()


# --- spectral machinery ---------------------------------------------------------


def max_singular_value(
    w: np.ndarray,
    u: np.ndarray | None = None,
    v: np.ndarray | None = None,
    tol: float = 1e-4,
    iters: int = 30,
):
    """Power iteration estimate of the largest singular value.

    Returns (sigma, u, v); pass the vectors back in to warm-start the next
    call.  A zero matrix reports 0.
    """
    if w.size == 0:
        raise ValueError("empty matrix")
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return 0.0, u, v
    if u is None or u.shape != (w.shape[0],):
        u = np.ones(w.shape[0]) / np.sqrt(w.shape[0])
    sigma = 0.0
    for _ in range(iters):
        v = w.T @ u
        nv = np.sqrt(v @ v)
        if nv == 0.0:
            return 0.0, u, v
        v = v / nv
        u = w @ v
        nu = np.sqrt(u @ u)
        if nu == 0.0:
            return 0.0, u, v
        u = u / nu
        new_sigma = float(u @ (w @ v))
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-30):
            sigma = new_sigma
            break
        sigma = new_sigma
    return sigma, u, v


def spectral_project(net: PolicyNet, k_lip: float | None = None) -> list[float]:
    """Scale every weight matrix whose largest singular value exceeds the
    budget; biases are untouched.  Returns the post-projection norms.

    Warm-started power iteration gives the cheap first estimate, but after
    many projections the top of the spectrum piles up at the budget and
    power iteration can no longer isolate sigma_1 (it stalls a fraction of a
    percent low, which breaks the certificate).  An exact values-only SVD of
    these small matrices costs ~1 ms, so the decisive measurement is exact.
    """
    k = net.k_lip if k_lip is None else k_lip
    sigmas = []
    n = net.mlp.n_layers
    while len(net._pi_u) < n:
        net._pi_u.append(None)
        net._pi_v.append(None)
    for i, w in enumerate(net.mlp.weights):
        if k is None:
            # cheap tracking only; nothing to enforce
            sigma, u, v = max_singular_value(w, net._pi_u[i], net._pi_v[i], tol=1e-6, iters=40)
            net._pi_u[i], net._pi_v[i] = u, v
        else:
            sigma = float(np.linalg.svd(w, compute_uv=False)[0])
            if sigma > k:
                w *= k / sigma
                sigma = float(k)
        sigmas.append(sigma)
    return sigmas


def lipschitz_bound(net: PolicyNet) -> float:
    """Certified bound on ||h(s1) - h(s2)|| / ||s1 - s2|| for the mean action:
    per-layer budget (or measured norms when unconstrained) raised over the
    depth, times the operator norms of the two diagonal scalings."""
    scale = float(np.max(np.abs(net.k_in)) * np.max(np.abs(net.k_out)))
    if net.k_lip is not None:
        return net.k_lip ** net.mlp.n_layers * scale
    prod = 1.0
    for w in net.mlp.weights:
        sigma, _, _ = max_singular_value(w, tol=1e-12, iters=200)
        prod *= sigma
    return prod * scale


# --- checkpoints ----------------------------------------------------------------


def save_policy(net: PolicyNet, path: str) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "obs_mode": net.obs_mode,
        "obs_dim": net.obs_dim,
        "k_lip": net.k_lip,
        "k_in": net.k_in.tolist(),
        "in_shift": net.in_shift.tolist(),
        "k_out": net.k_out.tolist(),
        "out_shift": net.out_shift.tolist(),
        "log_std": net.log_std.tolist(),
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(net.mlp.weights, net.mlp.biases)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_policy(path: str, expect_mode: str | None = None) -> PolicyNet:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a policy checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    mode = doc["obs_mode"]
    if expect_mode is not None and mode != expect_mode:
        raise CheckpointError(
            f"checkpoint is {mode}-mode ({doc['obs_dim']} inputs); "
            f"this pipeline expects {expect_mode}-mode ({OBS_DIM[expect_mode]})"
        )
    k_in = np.array(doc["k_in"])
    if doc["obs_dim"] != len(k_in) or doc["obs_dim"] != OBS_DIM[mode]:
        raise CheckpointError("checkpoint dimensions are inconsistent")
    mlp = Mlp(
        weights=[aligned_array(layer["w"]) for layer in doc["layers"]],
        biases=[np.array(layer["b"]) for layer in doc["layers"]],
    )
    if mlp.weights[0].shape[1] != doc["obs_dim"]:
        raise CheckpointError("first layer does not match the observation size")
    return PolicyNet(
        mlp=mlp,
        k_in=k_in,
        in_shift=np.array(doc["in_shift"]),
        k_out=np.array(doc["k_out"]),
        out_shift=np.array(doc["out_shift"]),
        log_std=np.array(doc["log_std"]),
        k_lip=doc["k_lip"],
        obs_mode=mode,
    )
