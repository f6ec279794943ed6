"""Vehicle parameters, rigid-body state, and controller gains.

The actuation model maps squared motor speeds and motor accelerations to
body moments and total thrust:

    [mu; T] = G1 @ (w ** 2) + G2 @ wdot

with motors numbered 1..4, spinning (+,-,+,-) about body z, mounted at the
(+x+y, -x+y, -x-y, +x-y) corners. G1 carries rotor thrust/drag-torque
coefficients and arm lengths; G2 carries rotor spin inertia reaction on the
yaw axis. Thrust T is negative (NED: thrust pulls toward -z).
"""

from dataclasses import dataclass, field, replace

import numpy as np

GRAVITY = 9.81


def _g1(k_thrust, k_yaw, l_x, l_y):
    return np.array([
        [l_y * k_thrust, -l_y * k_thrust, -l_y * k_thrust, l_y * k_thrust],
        [l_x * k_thrust, l_x * k_thrust, -l_x * k_thrust, -l_x * k_thrust],
        [-k_yaw, k_yaw, -k_yaw, k_yaw],
        [-k_thrust, -k_thrust, -k_thrust, -k_thrust],
    ])


def _g2(j_rotor):
    g2 = np.zeros((4, 4))
    g2[2] = [-j_rotor, j_rotor, -j_rotor, j_rotor]
    return g2


@dataclass
class VehicleParams:
    """Physical constants of the quadrotor and its motors."""

    mass: float = 0.609            # kg
    gravity: float = GRAVITY       # m/s^2, +z down
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([2.0e-3, 2.0e-3, 3.5e-3]))  # kg m^2
    rotor_inertia: float = 1.0e-5  # kg m^2, spin axis
    k_thrust: float = 2.3e-6       # N / (rad/s)^2 per motor
    k_yaw: float = 3.0e-8          # N m / (rad/s)^2 per motor
    arm_x: float = 0.09            # m, moment arm about body y
    arm_y: float = 0.09            # m, moment arm about body x
    motor_tau: float = 0.020       # s, first-order motor lag
    omega_min: float = 150.0       # rad/s
    omega_max: float = 2500.0      # rad/s

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.mass <= 0 or self.k_thrust <= 0 or self.motor_tau <= 0:
            raise ValueError("mass, k_thrust and motor_tau must be positive")
        if not (0 < self.omega_min < self.omega_max):
            raise ValueError("need 0 < omega_min < omega_max")
        w = np.linalg.eigvalsh(self.inertia)
        if w.min() <= 0:
            raise ValueError("inertia must be positive definite")
        self.g1 = _g1(self.k_thrust, self.k_yaw, self.arm_x, self.arm_y)
        self.g2 = _g2(self.rotor_inertia)
        self.g1_inv = np.linalg.inv(self.g1)
        self.inertia_inv = np.linalg.inv(self.inertia)

    @property
    def hover_speed(self):
        """Per-motor speed that balances gravity with level attitude."""
        return float(np.sqrt(self.mass * self.gravity / (4.0 * self.k_thrust)))

    @property
    def hover_thrust(self):
        """Total thrust at hover; negative because thrust acts along -z."""
        return -self.mass * self.gravity

    def with_inertia_scale(self, factor):
        """Copy with the inertia tensor scaled, for modeling-error studies."""
        return replace(self, inertia=self.inertia * factor)


@dataclass
class VehicleState:
    """Rigid-body plus motor state.

    pos, vel are inertial; att maps body to inertial; rates is the body
    angular velocity; motor_speeds are the four rotor speeds in rad/s.
    """

    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    att: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    motor_speeds: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def pack(self):
        out = np.empty(17)
        out[0:3] = self.pos
        out[3:6] = self.vel
        out[6:10] = self.att
        out[10:13] = self.rates
        out[13:17] = self.motor_speeds
        return out

    @classmethod
    def unpack(cls, s):
        return cls(pos=np.array(s[0:3]), vel=np.array(s[3:6]),
                   att=np.array(s[6:10]), rates=np.array(s[10:13]),
                   motor_speeds=np.array(s[13:17]))


@dataclass
class ControlGains:
    """Diagonal loop gains for the cascaded controller.

    pos/vel/acc close the translational loop, att/rate the rotational one.
    ki_motor is the only integral gain in the whole cascade; it trims
    steady-state motor speed error against ESC/battery droop.
    """

    pos: np.ndarray = field(default_factory=lambda: np.array([18.0, 18.0, 13.5]))
    vel: np.ndarray = field(default_factory=lambda: np.array([7.8, 7.8, 5.9]))
    acc: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 0.3]))
    att: np.ndarray = field(default_factory=lambda: np.array([175.0, 175.0, 82.0]))
    rate: np.ndarray = field(default_factory=lambda: np.array([19.5, 19.5, 19.2]))
    ki_motor: float = 1.5e-3

    def __post_init__(self):
        for name in ("pos", "vel", "acc", "att", "rate"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
