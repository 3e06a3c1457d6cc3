"""Vectorized stepping backend selection.

The hot loop (N envs x 10 inner steps of controller + RK4 at 1 kHz) exists
twice: a compiled Cython kernel and a numpy fallback with identical
arithmetic.  The compiled one is picked automatically when the extension
built; `TACO_BACKEND=numpy|compiled` forces a choice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .params import MavParams

try:
    from . import _kernel  # compiled extension

    HAVE_COMPILED = True
except ImportError:
    _kernel = None
    HAVE_COMPILED = False


@dataclass
class VecState:
    """State arrays for n independent vehicles."""

    p: np.ndarray       # (n, 3)
    v: np.ndarray       # (n, 3)
    r: np.ndarray       # (n, 3, 3)
    w: np.ndarray       # (n, 3)
    motor: np.ndarray   # (n, 4)
    voltage: np.ndarray  # (n,) open-circuit
    t: np.ndarray       # (n,)

    @classmethod
    def zeros(cls, n: int) -> "VecState":
        return cls(
            p=np.zeros((n, 3)),
            v=np.zeros((n, 3)),
            r=np.tile(np.eye(3), (n, 1, 1)),
            w=np.zeros((n, 3)),
            motor=np.zeros((n, 4)),
            voltage=np.zeros(n),
            t=np.zeros(n),
        )

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dataclass
class VecParams:
    """Per-env physical parameters (randomizable) plus the shared inner-loop
    constants, all laid out for the kernels."""

    # per-env physics
    mass: np.ndarray       # (n,)
    inertia: np.ndarray    # (n, 3, 3)
    inertia_inv: np.ndarray
    drag: np.ndarray       # (n, 3)
    k_force: np.ndarray    # (n,)
    k_torque: np.ndarray   # (n,)
    k_motor: np.ndarray    # (n,)
    poly_a0: np.ndarray    # (n,)
    poly_a1: np.ndarray    # (n,)
    c_power: np.ndarray    # (n,)
    capacity: np.ndarray   # (n,)
    r_int: np.ndarray      # (n,)

    # shared geometry / controller constants (the flight controller always
    # assumes the nominal vehicle)
    arms: np.ndarray           # (4, 3)
    spin: np.ndarray           # (4,)
    alloc_inv: np.ndarray      # (4, 4)
    inertia_nom: np.ndarray    # (3, 3)
    rate_gains: np.ndarray     # (3,)
    k_force_nom: float
    poly_a0_nom: float
    poly_a1_nom: float
    throttle_to_thrust: float
    gravity: float
    v_nominal: float
    v_min: float
    throttle_max: float
    rate_max: float

    @classmethod
    def nominal(cls, params: MavParams, n: int) -> "VecParams":
        ones = np.ones(n)
        return cls(
            mass=params.mass * ones,
            inertia=np.tile(params.inertia, (n, 1, 1)),
            inertia_inv=np.tile(np.linalg.inv(params.inertia), (n, 1, 1)),
            drag=np.tile(params.drag, (n, 1)),
            k_force=params.k_force * ones,
            k_torque=params.k_torque * ones,
            k_motor=params.k_motor * ones,
            poly_a0=params.poly_a0 * ones,
            poly_a1=params.poly_a1 * ones,
            c_power=params.c_power * ones,
            capacity=params.capacity_j * ones,
            r_int=params.r_int * ones,
            arms=params.arms.copy(),
            spin=params.spin.copy(),
            alloc_inv=np.linalg.inv(params.allocation_matrix()),
            inertia_nom=params.inertia.copy(),
            rate_gains=params.rate_gains.copy(),
            k_force_nom=params.k_force,
            poly_a0_nom=params.poly_a0,
            poly_a1_nom=params.poly_a1,
            throttle_to_thrust=params.throttle_to_thrust,
            gravity=params.gravity,
            v_nominal=params.v_nominal,
            v_min=params.v_min,
            throttle_max=params.throttle_max,
            rate_max=params.rate_max,
        )

    def set_inertia_scale(self, idx: np.ndarray, factor: np.ndarray) -> None:
        self.inertia[idx] = self.inertia_nom[None] * factor[:, None, None]
        self.inertia_inv[idx] = np.linalg.inv(self.inertia[idx])


def select_backend(name: str | None = None) -> str:
    name = name or os.environ.get("TACO_BACKEND", "")
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        return "compiled"
    if name == "numpy":
        return "numpy"
    return "compiled" if HAVE_COMPILED else "numpy"


def step_envs(
    state: VecState,
    actions: np.ndarray,
    vp: VecParams,
    substeps: int = 10,
    dt: float = 1e-3,
    backend: str | None = None,
):
    """Advance every env by `substeps` inner-loop steps under held actions.

    Mutates `state` in place; returns (terminal_voltage, saturated, fault)
    arrays.  Actions are clamped to the valid ranges first.
    """
    actions = np.ascontiguousarray(actions, dtype=float)
    np.clip(actions[:, 0], 0.0, vp.throttle_max, out=actions[:, 0])
    np.clip(actions[:, 1:], -vp.rate_max, vp.rate_max, out=actions[:, 1:])
    chosen = select_backend(backend)
    if chosen == "compiled":
        n = state.n
        vterm = np.zeros(n)
        sat = np.zeros(n, dtype=np.uint8)
        fault = np.zeros(n, dtype=np.uint8)
        _kernel.step_envs(
            state.p, state.v, state.r, state.w, state.motor, state.voltage, state.t,
            actions,
            vp.mass, vp.inertia, vp.inertia_inv, vp.drag, vp.k_force, vp.k_torque,
            vp.k_motor, vp.poly_a0, vp.poly_a1, vp.c_power, vp.capacity, vp.r_int,
            vp.arms, vp.spin, vp.alloc_inv, vp.inertia_nom, vp.rate_gains,
            vp.k_force_nom, vp.poly_a0_nom, vp.poly_a1_nom, vp.throttle_to_thrust,
            vp.gravity, vp.v_nominal, vp.v_min,
            substeps, dt, vterm, sat, fault,
        )
        return vterm, sat.astype(bool), fault.astype(bool)
    from . import _kernel_np

    return _kernel_np.step_envs(state, actions, vp, substeps, dt)
