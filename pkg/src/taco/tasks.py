"""Maneuver task semantics: the target state that every task is expressed
against, the scalar command channel, and the flip progress bookkeeping.

Task flags: 0 = POS (hover at a pose), 1 = CIRCLE (orbit a center at a
commanded tangential speed), -1 = FLIP (full rotations about body x, commanded
as a remaining angle).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import unwrap_step, yaw_rotation

TASK_POS = 0.0
TASK_CIRCLE = 1.0
TASK_FLIP = -1.0

TASK_NAMES = {"pos": TASK_POS, "circle": TASK_CIRCLE, "flip": TASK_FLIP}
FLAG_NAMES = {TASK_POS: "pos", TASK_CIRCLE: "circle", TASK_FLIP: "flip"}


@dataclass
class TaskSpec:
    """One env's task: flag, scalar command, and the target pose."""

    flag: float
    target_p: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 3.0]))
    yaw: float = 0.0            # POS: desired yaw
    radius: float = 1.2         # CIRCLE: fixed per episode
    speed: float = 0.0          # CIRCLE: commanded tangential speed, m/s
    flip_total: float = 0.0     # FLIP: cumulative commanded rotation, rad
    flip_done: float = 0.0      # FLIP: unwrapped roll rotated so far, rad

    def __post_init__(self) -> None:
        if self.flag not in (TASK_POS, TASK_CIRCLE, TASK_FLIP):
            raise ValueError(f"unknown task flag {self.flag}")
        self.target_p = np.asarray(self.target_p, dtype=float)

    @property
    def command(self) -> float:
        """The online-adjustable scalar the policy observes."""
        if self.flag == TASK_CIRCLE:
            return self.speed
        if self.flag == TASK_FLIP:
            return self.flip_total - self.flip_done
        return 0.0

    def target_state(self) -> tuple[np.ndarray, np.ndarray]:
        """Constant target pose; only POS carries a non-identity attitude."""
        if self.flag == TASK_POS:
            return self.target_p.copy(), yaw_rotation(self.yaw)
        return self.target_p.copy(), np.eye(3)


def make_task(kind: str, **kwargs) -> TaskSpec:
    if kind not in TASK_NAMES:
        raise ValueError(f"unknown task kind {kind!r} (expected pos/circle/flip)")
    return TaskSpec(flag=TASK_NAMES[kind], **kwargs)


def update_flip_progress(task: TaskSpec, roll_prev: float, roll_now: float) -> TaskSpec:
    """Accumulate the signed roll increment, unwrapping across +-pi.

    Sampling must be fast enough that one step rotates less than pi; at the
    100 Hz policy rate that allows > 300 rad/s.
    """
    task.flip_done += unwrap_step(roll_prev, roll_now)
    return task


def trigger_flip(task: TaskSpec, turns: int = 1) -> TaskSpec:
    """Operator command: add whole rotations to the commanded total."""
    task.flip_total += 2.0 * np.pi * turns
    return task
