"""Trajectory logs: one named-column CSV row per policy step, replayable by
the eval harness and the live service."""

from __future__ import annotations

import numpy as np

from .env import REWARD_TERMS, VecEnv

TRAJ_COLUMNS = (
    ["t", "px", "py", "pz", "vx", "vy", "vz"]
    + [f"r{i}{j}" for i in range(3) for j in range(3)]
    + ["wx", "wy", "wz", "m1", "m2", "m3", "m4", "voltage"]
    + ["act_throttle", "act_wx", "act_wy", "act_wz"]
    + [f"rew_{name}" for name in REWARD_TERMS]
    + ["reward", "flag", "command"]
)


class TrajectoryWriter:
    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w")
        self._fh.write(",".join(TRAJ_COLUMNS) + "\n")

    def append(self, env: VecEnv, i: int, action: np.ndarray, reward: float, terms: np.ndarray) -> None:
        s = env.state
        command = env.task_spec(i).command
        row = np.concatenate(
            [
                [s.t[i]],
                s.p[i], s.v[i], s.r[i].reshape(9), s.w[i], s.motor[i],
                [s.voltage[i]],
                action,
                terms,
                [reward, env.flag[i], command],
            ]
        )
        self._fh.write(",".join(f"{x:.9g}" for x in row) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory(path: str) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"trajectory log {path} holds no rows")
    if data.shape[1] != len(header):
        raise ValueError(f"trajectory log {path} does not match its header")
    return {name: data[:, k] for k, name in enumerate(header)}


def rotations_from_log(log: dict[str, np.ndarray]) -> np.ndarray:
    n = len(log["t"])
    out = np.empty((n, 3, 3))
    for i in range(3):
        for j in range(3):
            out[:, i, j] = log[f"r{i}{j}"]
    return out
