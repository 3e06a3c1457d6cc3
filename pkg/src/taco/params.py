"""Physical constants of the simulated MAV and the inner-loop controller.

Defaults describe a 0.46 kg X-frame quad with a 0.149 m motor-to-motor
distance and a 4.1 thrust-to-weight ratio.  Everything is overridable from
a JSON file (see `MavParams.from_file`) or the CLI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

GRAVITY = 9.81

# nominal airframe
MASS = 0.46                      # kg
MOTOR_DISTANCE = 0.149           # m, diagonal motor-to-motor
THRUST_TO_WEIGHT = 4.1           # at full throttle, nominal voltage

# full-throttle motor speed at nominal voltage; k_force follows from the
# thrust-to-weight ratio so both stay consistent
OMEGA_MAX = 2800.0               # rad/s
K_FORCE = THRUST_TO_WEIGHT * MASS * GRAVITY / (4.0 * OMEGA_MAX**2)
K_TORQUE = K_FORCE * 0.014       # torque-to-thrust ratio ~1.4 cm

V_NOMINAL = 25.2                 # 6S full charge
V_MIN = 19.2

THROTTLE_MAX = 1000.0
RATE_MAX = 20.0                  # rad/s, per axis


def _default_inertia() -> np.ndarray:
    return np.diag([7.5e-4, 7.5e-4, 1.3e-3])


def _default_drag() -> np.ndarray:
    # opposes body-frame velocity; heavier in-plane than along thrust
    return np.array([0.30, 0.30, 0.10])


def _default_arms() -> np.ndarray:
    a = MOTOR_DISTANCE / 2.0 * np.sqrt(0.5)
    return np.array(
        [
            [a, -a, 0.0],   # front-right
            [a, a, 0.0],    # front-left
            [-a, a, 0.0],   # rear-left
            [-a, -a, 0.0],  # rear-right
        ]
    )


def _default_spin() -> np.ndarray:
    # alternating reaction-torque signs, two CW and two CCW
    return np.array([1.0, -1.0, 1.0, -1.0])


@dataclass
class MavParams:
    """All constants the dynamics and the 1 kHz inner loop need."""

    mass: float = MASS
    gravity: float = GRAVITY
    inertia: np.ndarray = field(default_factory=_default_inertia)   # 3x3
    drag: np.ndarray = field(default_factory=_default_drag)         # diag of -K_drag
    k_force: float = K_FORCE        # N s^2/rad^2
    k_torque: float = K_TORQUE      # N m s^2/rad^2
    k_motor: float = 0.012          # s, first-order motor time constant
    arms: np.ndarray = field(default_factory=_default_arms)         # 4x3, m
    spin: np.ndarray = field(default_factory=_default_spin)         # 4, +-1

    # steady motor speed = (poly_a0 + poly_a1 * V) * sqrt(pwm)
    poly_a1: float = 60.0           # rad/s per volt of sag
    poly_a0: float = 0.0            # derived in __post_init__ unless set

    # battery surrogate: electrical power c_power * sum(Omega^3), open-circuit
    # voltage dropping linearly with drained energy, terminal sag r_int * I
    v_nominal: float = V_NOMINAL
    v_min: float = V_MIN
    c_power: float = 7.1e-9         # W s^3/rad^3
    capacity_j: float = 20500.0     # J, sized so ~90 back-to-back flips drain it
    r_int: float = 0.06             # ohm-ish sag coefficient

    throttle_max: float = THROTTLE_MAX
    rate_max: float = RATE_MAX

    # inner loop: proportional body-rate gains (1/s) + gyroscopic feedforward
    rate_gains: np.ndarray = field(default_factory=lambda: np.array([45.0, 45.0, 45.0]))

    def __post_init__(self) -> None:
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.drag = np.asarray(self.drag, dtype=float)
        self.arms = np.asarray(self.arms, dtype=float)
        self.spin = np.asarray(self.spin, dtype=float)
        self.rate_gains = np.asarray(self.rate_gains, dtype=float)
        self.validate()
        if self.poly_a0 == 0.0:
            # pin full throttle at nominal voltage to the thrust-to-weight ratio
            omega_full = np.sqrt(
                THRUST_TO_WEIGHT * self.mass * self.gravity / (4.0 * self.k_force)
            )
            self.poly_a0 = float(omega_full - self.poly_a1 * self.v_nominal)

    def validate(self) -> None:
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.inertia.shape != (3, 3) or not np.allclose(self.inertia, self.inertia.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ValueError("inertia must be positive definite")
        if self.k_force <= 0 or self.k_torque <= 0 or self.k_motor <= 0:
            raise ValueError("k_force, k_torque, k_motor must be positive")
        if self.spin.shape != (4,) or abs(self.spin.sum()) > 1e-12 or np.any(np.abs(self.spin) != 1):
            raise ValueError("spin signs must be four +-1 entries summing to zero")
        if self.arms.shape != (4, 3) or np.any(np.abs(self.arms.sum(axis=0)) > 1e-12):
            raise ValueError("arm positions must be a symmetric 4x3 layout summing to zero")
        if np.any(self.drag < 0):
            raise ValueError("drag coefficients must be nonnegative")

    # --- derived quantities -------------------------------------------------

    @property
    def gravity_vec(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.gravity])

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity

    @property
    def throttle_to_thrust(self) -> float:
        """Linear throttle -> desired collective thrust map, N per throttle unit."""
        return THRUST_TO_WEIGHT * MASS * GRAVITY / THROTTLE_MAX

    @property
    def hover_throttle(self) -> float:
        return self.hover_thrust / self.throttle_to_thrust

    def max_motor_speed(self, voltage: float) -> float:
        return self.poly_a0 + self.poly_a1 * voltage

    def allocation_matrix(self) -> np.ndarray:
        """Rows map per-motor thrusts to (collective thrust, tau_x, tau_y, tau_z)."""
        kappa = self.k_torque / self.k_force
        b = np.zeros((4, 4))
        b[0] = 1.0
        b[1] = self.arms[:, 1]
        b[2] = -self.arms[:, 0]
        b[3] = self.spin * kappa
        return b

    # --- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, val in d.items():
            if isinstance(val, np.ndarray):
                d[key] = val.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MavParams":
        return cls(**d)

    @classmethod
    def from_file(cls, path: str) -> "MavParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: str | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text
