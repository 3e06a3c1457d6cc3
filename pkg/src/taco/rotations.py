"""Small SO(3) toolbox shared by the simulator, tasks, and baselines."""

from __future__ import annotations

import numpy as np


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(w) @ v == cross(w, v)."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula, exact rotation for a constant rate over one step."""
    angle = float(np.linalg.norm(w))
    if angle < 1e-12:
        return np.eye(3) + hat(w)
    axis = w / angle
    k = hat(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def euler_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-world rotation from yaw-pitch-roll (applied z, then y, then x)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def yaw_rotation(yaw: float) -> np.ndarray:
    return euler_zyx(0.0, 0.0, yaw)


def roll_angle(r: np.ndarray) -> float:
    """Roll of a body-to-world matrix in the zyx convention, wrapped to (-pi, pi]."""
    return float(np.arctan2(r[2, 1], r[2, 2]))


def rotation_angle(r: np.ndarray) -> float:
    """Axis-angle magnitude in [0, pi]."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest-ish rotation via Gram-Schmidt on the columns."""
    c0 = r[:, 0] / np.linalg.norm(r[:, 0])
    c1 = r[:, 1] - np.dot(c0, r[:, 1]) * c0
    c1 = c1 / np.linalg.norm(c1)
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=1)


def mat_to_quat(r: np.ndarray) -> np.ndarray:
    """(w, x, y, z) with w >= 0, Shepperd-style pivot for stability."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_so3(axis * rng.uniform(-max_angle, max_angle))


def unwrap_step(prev: float, new: float) -> float:
    """Signed increment from prev to new, assuming |true step| < pi."""
    d = new - prev
    if d > np.pi:
        d -= 2.0 * np.pi
    elif d < -np.pi:
        d += 2.0 * np.pi
    return d


def unwrap_step_batch(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    d = new - prev
    d = np.where(d > np.pi, d - 2.0 * np.pi, d)
    return np.where(d < -np.pi, d + 2.0 * np.pi, d)


def exp_so3_batch(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a batch of rotation vectors, (n, 3) -> (n, 3, 3)."""
    n = w.shape[0]
    angle = np.linalg.norm(w, axis=1)
    eye = np.tile(np.eye(3), (n, 1, 1))
    small = angle < 1e-12

    k = np.zeros((n, 3, 3))
    k[:, 0, 1], k[:, 0, 2] = -w[:, 2], w[:, 1]
    k[:, 1, 0], k[:, 1, 2] = w[:, 2], -w[:, 0]
    k[:, 2, 0], k[:, 2, 1] = -w[:, 1], w[:, 0]
    if np.all(small):
        return eye + k

    safe = np.where(small, 1.0, angle)
    axis_k = k / safe[:, None, None]
    sin_a = np.sin(angle)[:, None, None]
    cos_a = (1.0 - np.cos(angle))[:, None, None]
    rod = eye + sin_a * axis_k + cos_a * np.einsum("nij,njk->nik", axis_k, axis_k)
    rod[small] = eye[small] + k[small]
    return rod


def orthonormalize_batch(r: np.ndarray) -> np.ndarray:
    c0 = r[:, :, 0]
    c0 = c0 / np.linalg.norm(c0, axis=1)[:, None]
    c1 = r[:, :, 1] - np.sum(c0 * r[:, :, 1], axis=1)[:, None] * c0
    c1 = c1 / np.linalg.norm(c1, axis=1)[:, None]
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=2)


def mat_to_quat_batch(r: np.ndarray) -> np.ndarray:
    """(n, 3, 3) -> (n, 4) unit quaternions (w, x, y, z), w >= 0."""
    out = np.empty((r.shape[0], 4))
    for i in range(r.shape[0]):
        out[i] = mat_to_quat(r[i])
    return out
