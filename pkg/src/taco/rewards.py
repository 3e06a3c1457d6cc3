"""Product-of-fractions rewards shared by the three maneuver tasks.

Every sub-term is sum_i 1/(1 + lam_i * ||x||^2): bounded in (0, n], maximal
at x = 0, and strictly decreasing in ||x||.  Multi-scale coefficient lists
give a wide basin plus a sharp peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATT_LAMBDA = 4.0 / np.pi**2


@dataclass
class RewardTerm:
    lams: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lams) < 1 or any(l <= 0 for l in self.lams):
            raise ValueError("coefficients must be a nonempty positive list")

    @property
    def n(self) -> int:
        return len(self.lams)


@dataclass
class RewardConfig:
    """Coefficient lists per sub-term appearing in the task rewards."""

    position: RewardTerm = field(default_factory=lambda: RewardTerm((1.0, 100.0)))
    attitude: RewardTerm = field(default_factory=lambda: RewardTerm((ATT_LAMBDA, 16.0 * ATT_LAMBDA)))
    altitude: RewardTerm = field(default_factory=lambda: RewardTerm((1.0, 100.0)))
    radius: RewardTerm = field(default_factory=lambda: RewardTerm((1.0, 100.0)))
    speed: RewardTerm = field(default_factory=lambda: RewardTerm((1.0, 100.0)))
    heading: RewardTerm = field(default_factory=lambda: RewardTerm((ATT_LAMBDA,)))
    flip_left: RewardTerm = field(default_factory=lambda: RewardTerm((0.2, 20.0)))


def sub_reward(x, term: RewardTerm):
    """r(x) = sum_i 1/(1 + lam_i ||x||^2); accepts scalars, vectors, or
    batches (last axis is the vector axis for 2-d input)."""
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        sq = float(np.dot(x.ravel(), x.ravel()))
        return float(sum(1.0 / (1.0 + l * sq) for l in term.lams))
    sq = np.sum(x * x, axis=-1)
    out = np.zeros_like(sq)
    for l in term.lams:
        out += 1.0 / (1.0 + l * sq)
    return out


def sub_reward_sq(sq: np.ndarray, term: RewardTerm) -> np.ndarray:
    """Same, given ||x||^2 directly (vectorized helper)."""
    out = np.zeros_like(sq)
    for l in term.lams:
        out += 1.0 / (1.0 + l * sq)
    return out


def max_reward(flag: float, cfg: RewardConfig) -> float:
    if flag == 0.0:
        return cfg.position.n * cfg.attitude.n
    if flag == 1.0:
        return cfg.altitude.n * cfg.radius.n * cfg.speed.n * cfg.heading.n
    return cfg.position.n * cfg.attitude.n * cfg.flip_left.n


def reward_pos(p_rel_body: np.ndarray, rel_angle: float, cfg: RewardConfig) -> float:
    """Hover reward: body-frame position error times the axis-angle magnitude
    of the relative attitude."""
    return sub_reward(p_rel_body, cfg.position) * sub_reward(rel_angle, cfg.attitude)


def reward_circle(
    p_rel_world: np.ndarray,
    v_world: np.ndarray,
    body_x_world: np.ndarray,
    radius: float,
    speed_cmd: float,
    cfg: RewardConfig,
    tangent_memory: np.ndarray | None = None,
) -> tuple[float, dict]:
    """Orbit reward: altitude error, ring distance error, signed tangential
    speed error, and in-plane heading-to-center error.

    Tangential speed is positive counterclockwise seen from above, so a
    negative command reverses the direction of travel.  Within 1 cm of the
    axis the tangent direction is taken from `tangent_memory` if given.
    """
    alt_err = p_rel_world[2]
    d = -p_rel_world[:2]              # center -> MAV, horizontal
    dist = np.hypot(d[0], d[1])
    if dist >= 1e-2:
        radial = d / dist
    elif tangent_memory is not None and np.hypot(*tangent_memory) > 0:
        radial = np.asarray(tangent_memory, dtype=float)
    else:
        radial = np.array([1.0, 0.0])
    tangent = np.array([-radial[1], radial[0]])   # z cross radial
    v_perp = float(v_world[:2] @ tangent)

    bx = body_x_world[:2]
    to_center = -radial
    nb = np.hypot(bx[0], bx[1])
    if nb < 1e-9:
        head_angle = 0.0                # body x vertical: heading undefined
    else:
        cosang = np.clip((bx @ to_center) / nb, -1.0, 1.0)
        head_angle = float(np.arccos(cosang))

    terms = {
        "altitude": sub_reward(alt_err, cfg.altitude),
        "radius": sub_reward(dist - radius, cfg.radius),
        "speed": sub_reward(v_perp - speed_cmd, cfg.speed),
        "heading": sub_reward(head_angle, cfg.heading),
        "v_perp": v_perp,
        "radial": radial,
    }
    total = terms["altitude"] * terms["radius"] * terms["speed"] * terms["heading"]
    return total, terms


def reward_flip(
    p_rel_body: np.ndarray,
    body_x_world: np.ndarray,
    target_x_world: np.ndarray,
    remaining: float,
    cfg: RewardConfig,
) -> float:
    """Flip reward: position error, x-axis alignment (invariant under the roll
    itself), and the remaining commanded rotation."""
    cosang = np.clip(float(body_x_world @ target_x_world), -1.0, 1.0)
    x_angle = float(np.arccos(cosang))
    return (
        sub_reward(p_rel_body, cfg.position)
        * sub_reward(x_angle, cfg.attitude)
        * sub_reward(remaining, cfg.flip_left)
    )
