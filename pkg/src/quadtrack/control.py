"""Cascaded trajectory-tracking controller.

Loop order per tick, outer to inner:

  position PD + acceleration feedback -> commanded acceleration
  incremental linear inversion        -> commanded thrust vector
  attitude command construction       -> commanded attitude increment
  attitude P + rate feedback + feedforward -> commanded angular accel
  incremental angular inversion       -> commanded moment
  allocation                          -> motor speed commands
  motor speed loop (P=0, I only on top of the static map) -> throttle

The incremental steps command changes relative to filtered measurements
of what the vehicle is currently doing, so model error and external
forces are absorbed without integral action anywhere except the motor
speed loop. All quantities are NED: +z down, thrust scalar negative.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import flatness, quat
from .allocation import allocate, allocate_linearized
from .dynamics import SensorSample
from .errors import ControlError, DegenerateThrust
from .filters import DEFAULT_CUTOFF, FilterBank
from .vehicle import ControlGains, VehicleParams

THRUST_EPS = 1e-3


def position_control(ref, pos, vel, acc_f, gains):
    """Commanded acceleration from position/velocity/acceleration errors."""
    return (gains.pos * (ref.pos - pos) + gains.vel * (ref.vel - vel)
            + gains.acc * (ref.acc - acc_f) + ref.acc)


def thrust_vector_increment(acc_cmd, signals, mass):
    """Commanded specific-thrust vector, incremental form.

    Adds the commanded-minus-filtered acceleration increment onto the
    filtered thrust vector, so only the *change* relies on the model.
    """
    t_vec = signals.thrust_vec + acc_cmd - signals.acc
    n = math.sqrt(t_vec[0] ** 2 + t_vec[1] ** 2 + t_vec[2] ** 2)
    if n <= THRUST_EPS:
        raise DegenerateThrust("commanded thrust vector is near zero")
    return t_vec, -mass * n


def thrust_vector_direct(acc_cmd, gravity, mass):
    """Non-incremental thrust vector straight from the model."""
    t_vec = np.array([acc_cmd[0], acc_cmd[1], acc_cmd[2] - gravity])
    n = math.sqrt(t_vec[0] ** 2 + t_vec[1] ** 2 + t_vec[2] ** 2)
    if n <= THRUST_EPS:
        raise DegenerateThrust("commanded thrust vector is near zero")
    return t_vec, -mass * n


def attitude_command(thrust_vec_cmd, att, yaw_ref, yaw_sign):
    """Attitude increment quaternion aligning body -z with the command.

    Built as tilt-then-yaw: the shortest rotation taking the current
    body thrust axis onto the commanded direction, followed by a yaw
    rotation that restores the reference heading. The yaw angle is kept
    in (-pi/2, pi/2]; at the +-pi/2 ambiguity the sign continuous with
    the previous tick is chosen (yaw_sign carries that memory).

    Returns (xi_c, yaw_sign).
    """
    n = math.sqrt(thrust_vec_cmd[0] ** 2 + thrust_vec_cmd[1] ** 2
                  + thrust_vec_cmd[2] ** 2)
    u = quat.rotate_inverse(att, thrust_vec_cmd / n)

    # Shortest rotation from body -z onto u, expressed in body axes.
    w = 1.0 - u[2]
    if w <= 1e-12:
        tilt = np.array([0.0, 1.0, 0.0, 0.0])
    else:
        s = 1.0 / math.sqrt(2.0 * w)
        tilt = np.array([w * s, u[1] * s, -u[0] * s, 0.0])

    # Heading normal in the frame reached after the tilt.
    n_ref = np.array([math.sin(yaw_ref), -math.cos(yaw_ref), 0.0])
    n_mid = quat.rotate_inverse(quat.mul(att, tilt), n_ref)
    h = math.hypot(n_mid[0], n_mid[1])
    if h <= 1e-12:
        theta = 0.0
    elif abs(n_mid[1]) <= 1e-12 * h:
        theta = yaw_sign * 0.5 * math.pi
    else:
        theta = math.atan2(-n_mid[0], n_mid[1])
        if theta > 0.5 * math.pi:
            theta -= math.pi
        elif theta <= -0.5 * math.pi:
            theta += math.pi
        if theta > 1e-9:
            yaw_sign = 1.0
        elif theta < -1e-9:
            yaw_sign = -1.0
    half = 0.5 * theta
    yaw_q = np.array([math.cos(half), 0.0, 0.0, math.sin(half)])
    return quat.mul(tilt, yaw_q), yaw_sign


def error_angles(xi_c):
    """Rotation-vector attitude error from the increment quaternion.

    The sign is canonicalized (scalar part >= 0) so the error never
    exceeds pi and small increments map to approximately 2*vector part.
    """
    q = quat.canonicalize(xi_c)
    w = min(q[0], 1.0)
    if 1.0 - w < 1e-6:
        return 2.0 * q[1:4]
    angle = 2.0 * math.acos(w)
    return (angle / math.sqrt(1.0 - w * w)) * q[1:4]


def attitude_control(att_err, rates_ref, rates_f, rates_dot_ref, gains):
    """Commanded angular acceleration."""
    return (gains.att * att_err + gains.rate * (rates_ref - rates_f)
            + rates_dot_ref)


def moment_increment(rates_dot_cmd, signals, inertia):
    """Commanded moment, incremental form about the filtered moment."""
    return signals.moment + inertia @ (rates_dot_cmd - signals.rates_dot)


class MotorMap:
    """Static quadratic map between motor speed and throttle.

    Strictly increasing on the speed range by construction; the inverse
    takes the increasing branch of the parabola. Also owns the motor
    speed loop integrator (the only integral state in the controller).
    """

    def __init__(self, c0, c1, c2, omega_min, omega_max):
        self.c0 = c0
        self.c1 = c1
        self.c2 = c2
        self.omega_min = omega_min
        self.omega_max = omega_max
        d_lo = c1 + 2.0 * c2 * omega_min
        d_hi = c1 + 2.0 * c2 * omega_max
        if d_lo <= 0.0 or d_hi <= 0.0:
            raise ValueError("throttle map is not strictly increasing")
        self.integ = np.zeros(4)
        self.prev_err = np.zeros(4)

    @classmethod
    def from_params(cls, params, z_min=0.05, z_mid=0.45, z_max=0.95):
        """Fit through (omega_min, z_min), (hover, z_mid), (omega_max, z_max)."""
        x0, x1, x2 = params.omega_min, params.hover_speed, params.omega_max
        d01 = (z_mid - z_min) / (x1 - x0)
        d12 = (z_max - z_mid) / (x2 - x1)
        c2 = (d12 - d01) / (x2 - x0)
        c1 = d01 - c2 * (x0 + x1)
        c0 = z_min - x0 * (c1 + c2 * x0)
        return cls(c0, c1, c2, params.omega_min, params.omega_max)

    def forward(self, omega):
        return self.c0 + omega * (self.c1 + self.c2 * omega)

    def inverse(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if abs(self.c2) < 1e-300:
            return (zeta - self.c0) / self.c1
        # The increasing branch is the same root expression for either
        # parabola orientation: +root with c2 > 0, and with c2 < 0 the
        # division by a negative picks the branch left of the vertex.
        disc = self.c1 ** 2 - 4.0 * self.c2 * (self.c0 - zeta)
        root = np.sqrt(np.maximum(disc, 0.0))
        return (-self.c1 + root) / (2.0 * self.c2)

    def reset(self):
        self.integ[:] = 0.0
        self.prev_err[:] = 0.0


def motor_speed_control(w_cmd, w_meas, mmap, dt, ki):
    """Throttle from the static map plus trapezoidal integral action.

    The integrator freezes per motor whenever the throttle clamps, so it
    cannot wind up against saturation.
    """
    err = w_cmd - w_meas
    integ_new = mmap.integ + 0.5 * dt * (err + mmap.prev_err)
    raw = mmap.forward(w_cmd) + ki * integ_new
    zeta = np.clip(raw, 0.0, 1.0)
    clamped = raw != zeta
    mmap.integ = np.where(clamped, mmap.integ, integ_new)
    mmap.prev_err = err
    return zeta


@dataclass
class ControlModes:
    """Switches for controller variants used in comparison studies."""

    feedforward: bool = True            # rate/accel feedforward from the reference
    ff_from_state: bool = False         # evaluate feedforward in the measured frame
    non_incremental: bool = False       # classic model-based inversion throughout
    linearized_allocation: bool = False
    inertia_scale: float = 1.0          # control-model inertia mismatch factor


@dataclass
class LoopOutputs:
    """Per-tick intermediate commands, mainly for logging and analysis."""

    acc_cmd: np.ndarray
    thrust_vec_cmd: np.ndarray
    thrust_cmd: float
    att_err: np.ndarray
    rates_dot_cmd: np.ndarray
    moment_cmd: np.ndarray
    motor_cmd: np.ndarray
    throttle: np.ndarray
    force_est: np.ndarray
    fault: bool = False


class Controller:
    """Full cascade with shared measurement filtering.

    One tick consumes a SensorSample and a flatness.ReferenceSample and
    produces a throttle vector. Recoverable per-tick failures (degenerate
    thrust command, singular feedforward) hold the previous throttle for
    that tick; the filters still advance.
    """

    def __init__(self, params, gains=None, modes=None, motor_map=None,
                 cutoff_rad_s=DEFAULT_CUTOFF, fs_hz=2000.0):
        self.params = params
        self.gains = gains if gains is not None else ControlGains()
        self.modes = modes if modes is not None else ControlModes()
        self.map = motor_map if motor_map is not None else \
            MotorMap.from_params(params)
        self.bank = FilterBank(params, cutoff_rad_s, fs_hz)
        self.dt = 1.0 / fs_hz
        self.ctrl_inertia = params.inertia * self.modes.inertia_scale
        self.yaw_sign = 1.0
        self.backshift = np.zeros(4)
        self.prev_throttle = np.clip(
            self.map.forward(np.full(4, params.hover_speed)), 0.0, 1.0)

    def state_summary(self):
        """Names of all persistent controller state, for inspection."""
        return {
            "filters": self.bank,
            "motor_integrator": self.map.integ,
            "yaw_sign": self.yaw_sign,
            "allocation_backshift": self.backshift,
            "previous_throttle": self.prev_throttle,
        }

    def tick(self, sample, ref):
        par = self.params
        modes = self.modes
        signals = self.bank.update(sample)
        force_est = self.bank.external_force(signals)

        try:
            acc_cmd = position_control(ref, sample.pos, sample.vel,
                                       signals.acc, self.gains)
            if modes.non_incremental:
                t_vec, thrust_cmd = thrust_vector_direct(
                    acc_cmd, par.gravity, par.mass)
            else:
                t_vec, thrust_cmd = thrust_vector_increment(
                    acc_cmd, signals, par.mass)

            xi_c, self.yaw_sign = attitude_command(
                t_vec, sample.att, ref.yaw, self.yaw_sign)
            att_err = error_angles(xi_c)

            if modes.feedforward:
                if modes.ff_from_state:
                    frame = (quat.rotmat(sample.att), signals.thrust_scalar,
                             signals.rates, signals.thrust_scalar_dot)
                    ff = flatness.feedforward(ref, par.gravity, frame=frame)
                else:
                    ff = flatness.feedforward(ref, par.gravity)
                rates_ref = ff.rates
                rates_dot_ref = ff.rates_dot
            else:
                rates_ref = np.zeros(3)
                rates_dot_ref = np.zeros(3)

            rates_dot_cmd = attitude_control(att_err, rates_ref,
                                             signals.rates, rates_dot_ref,
                                             self.gains)
            if modes.non_incremental:
                moment_cmd = self.ctrl_inertia @ rates_dot_cmd
            else:
                moment_cmd = moment_increment(rates_dot_cmd, signals,
                                              self.ctrl_inertia)

            if modes.linearized_allocation:
                motor_cmd, self.backshift = allocate_linearized(
                    moment_cmd, thrust_cmd, signals.moment,
                    signals.thrust_scalar * par.mass, signals.motor,
                    par, self.dt, self.backshift)
            else:
                motor_cmd, moment_cmd, thrust_cmd = allocate(
                    moment_cmd, thrust_cmd, sample.motor_speeds, par)

            throttle = motor_speed_control(motor_cmd, sample.motor_speeds,
                                           self.map, self.dt,
                                           self.gains.ki_motor)
        except ControlError:
            throttle = self.prev_throttle.copy()
            nan3 = np.full(3, np.nan)
            out = LoopOutputs(acc_cmd=nan3, thrust_vec_cmd=nan3,
                              thrust_cmd=np.nan, att_err=nan3,
                              rates_dot_cmd=nan3, moment_cmd=nan3,
                              motor_cmd=np.full(4, np.nan),
                              throttle=throttle, force_est=force_est,
                              fault=True)
            return throttle, out

        self.prev_throttle = throttle
        out = LoopOutputs(acc_cmd=acc_cmd, thrust_vec_cmd=t_vec,
                          thrust_cmd=thrust_cmd, att_err=att_err,
                          rates_dot_cmd=rates_dot_cmd, moment_cmd=moment_cmd,
                          motor_cmd=motor_cmd, throttle=throttle,
                          force_est=force_est)
        return throttle, out
