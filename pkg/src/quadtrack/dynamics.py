"""Six-degree-of-freedom quadrotor plant.

State layout (17 floats, see VehicleState.pack):

    [0:3]   inertial position (NED, m)
    [3:6]   inertial velocity (m/s)
    [6:10]  attitude quaternion, body -> inertial
    [10:13] body angular velocity (rad/s)
    [13:17] motor speeds (rad/s)

Dynamics:

    xdot = v
    vdot = g iz + tau bz + f_ext / m          (tau = T/m, negative)
    qdot = 0.5 q * [0, W]
    Wdot = J^-1 (mu + mu_ext - W x J W)
    wdot = (w_ss - w) / tau_m                 (first-order motor lag)

where [mu; T] = G1 w**2 + G2 wdot, and w_ss is the speed the ESC settles
at for the commanded throttle. Integration is classical RK4; the attitude
quaternion is renormalized and motor speeds are clipped to their limits
after every step. The derivative is written in unrolled scalar arithmetic
because it runs at 8 kHz times four stages.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite
from .vehicle import VehicleState

AIR_DENSITY = 1.225  # kg/m^3

_ZERO6 = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class ConstantForce:
    """Constant external force (and optional moment) over a time window."""

    force: np.ndarray
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_on: float = 0.0
    t_off: float = math.inf

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float)
        self.moment = np.asarray(self.moment, dtype=float)
        self._tuple = (self.force[0], self.force[1], self.force[2],
                       self.moment[0], self.moment[1], self.moment[2])

    def eval_raw(self, t, s):
        if self.t_on <= t <= self.t_off:
            return self._tuple
        return _ZERO6


@dataclass
class WirePull:
    """Tether force following a piecewise-linear schedule of (time, force).

    Force is zero before the first and after the last knot, so a pull that
    ramps up, holds, and releases is a four-knot schedule.
    """

    times: np.ndarray
    forces: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.forces = np.asarray(self.forces, dtype=float).reshape(len(self.times), 3)
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("wire schedule needs at least two strictly increasing times")
        self._t = [float(v) for v in self.times]
        self._f = [tuple(row) for row in self.forces]

    def force_at(self, t):
        ts = self._t
        if t < ts[0] or t > ts[-1]:
            return (0.0, 0.0, 0.0)
        i = bisect_right(ts, t)
        if i >= len(ts):
            return self._f[-1]
        lo, hi = ts[i - 1], ts[i]
        a = (t - lo) / (hi - lo)
        f0, f1 = self._f[i - 1], self._f[i]
        return (f0[0] + a * (f1[0] - f0[0]),
                f0[1] + a * (f1[1] - f0[1]),
                f0[2] + a * (f1[2] - f0[2]))

    def eval_raw(self, t, s):
        fx, fy, fz = self.force_at(t)
        return (fx, fy, fz, 0.0, 0.0, 0.0)


@dataclass
class DragPlate:
    """Flat-plate drag normal to a body-fixed axis.

    The force is quadratic in the velocity component along the plate
    normal (resolved in inertial axes) and acts along that normal. A
    mounting offset turns the force into a body moment as well.
    """

    area: float = 0.0512          # m^2
    cd: float = 1.2
    normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0]))
    arm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rho: float = AIR_DENSITY

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        self.normal = self.normal / np.linalg.norm(self.normal)
        self.arm = np.asarray(self.arm, dtype=float)
        self._coeff = -0.5 * self.rho * self.cd * self.area
        # Force is parallel to the plate normal, so the body moment is
        # (arm x normal) scaled by the signed force magnitude.
        self._arm_cross_n = tuple(np.cross(self.arm, self.normal))
        self._n = tuple(self.normal)

    def eval_raw(self, t, s):
        q0, q1, q2, q3 = s[6], s[7], s[8], s[9]
        nx, ny, nz = self._n
        # Rotate normal to inertial axes.
        tx = 2.0 * (q2 * nz - q3 * ny)
        ty = 2.0 * (q3 * nx - q1 * nz)
        tz = 2.0 * (q1 * ny - q2 * nx)
        wnx = nx + q0 * tx + q2 * tz - q3 * ty
        wny = ny + q0 * ty + q3 * tx - q1 * tz
        wnz = nz + q0 * tz + q1 * ty - q2 * tx
        vn = s[3] * wnx + s[4] * wny + s[5] * wnz
        mag = self._coeff * abs(vn) * vn
        ax, ay, az = self._arm_cross_n
        return (mag * wnx, mag * wny, mag * wnz, mag * ax, mag * ay, mag * az)


@dataclass
class BodyDrag:
    """Isotropic airframe drag, linear plus quadratic in speed."""

    c_lin: float = 0.0     # N / (m/s)
    c_quad: float = 0.0    # N / (m/s)^2

    def eval_raw(self, t, s):
        vx, vy, vz = s[3], s[4], s[5]
        speed = math.sqrt(vx * vx + vy * vy + vz * vz)
        c = -(self.c_lin + self.c_quad * speed)
        return (c * vx, c * vy, c * vz, 0.0, 0.0, 0.0)


def _sum_models(models, t, s):
    fx = fy = fz = mx = my = mz = 0.0
    for m in models:
        a, b, c, d, e, f = m.eval_raw(t, s)
        fx += a
        fy += b
        fz += c
        mx += d
        my += e
        mz += f
    return fx, fy, fz, mx, my, mz


def disturbance_eval(model, state, t):
    """External (force, moment) of one model or a sequence, at time t.

    `model` may be None, a single disturbance object, or a sequence of
    them; contributions add. Returns two length-3 arrays (N, N m).
    """
    if model is None:
        models = ()
    elif isinstance(model, (list, tuple)):
        models = tuple(model)
    else:
        models = (model,)
    s = state.pack() if isinstance(state, VehicleState) else np.asarray(state)
    fx, fy, fz, mx, my, mz = _sum_models(models, t, s)
    return np.array([fx, fy, fz]), np.array([mx, my, mz])


def _deriv(s, cmd, models, par, t):
    """Time derivative of the packed state. cmd is the motor speed target."""
    q0, q1, q2, q3 = s[6], s[7], s[8], s[9]
    wx, wy, wz = s[10], s[11], s[12]
    w1, w2, w3, w4 = s[13], s[14], s[15], s[16]

    inv_tau = 1.0 / par.motor_tau
    d1 = (cmd[0] - w1) * inv_tau
    d2 = (cmd[1] - w2) * inv_tau
    d3 = (cmd[2] - w3) * inv_tau
    d4 = (cmd[3] - w4) * inv_tau

    kt = par.k_thrust
    s1, s2, s3, s4 = w1 * w1, w2 * w2, w3 * w3, w4 * w4
    mu_x = par.arm_y * kt * (s1 - s2 - s3 + s4)
    mu_y = par.arm_x * kt * (s1 + s2 - s3 - s4)
    mu_z = par.k_yaw * (-s1 + s2 - s3 + s4) + par.rotor_inertia * (-d1 + d2 - d3 + d4)
    thrust = -kt * (s1 + s2 + s3 + s4)
    tau = thrust / par.mass

    bzx = 2.0 * (q1 * q3 + q0 * q2)
    bzy = 2.0 * (q2 * q3 - q0 * q1)
    bzz = 1.0 - 2.0 * (q1 * q1 + q2 * q2)

    if models:
        fx, fy, fz, mex, mey, mez = _sum_models(models, t, s)
    else:
        fx = fy = fz = mex = mey = mez = 0.0

    inv_m = 1.0 / par.mass
    ax = tau * bzx + fx * inv_m
    ay = tau * bzy + fy * inv_m
    az = par.gravity + tau * bzz + fz * inv_m

    J = par.inertia
    jwx = J[0, 0] * wx + J[0, 1] * wy + J[0, 2] * wz
    jwy = J[1, 0] * wx + J[1, 1] * wy + J[1, 2] * wz
    jwz = J[2, 0] * wx + J[2, 1] * wy + J[2, 2] * wz
    rx = mu_x + mex - (wy * jwz - wz * jwy)
    ry = mu_y + mey - (wz * jwx - wx * jwz)
    rz = mu_z + mez - (wx * jwy - wy * jwx)
    Ji = par.inertia_inv
    wdx = Ji[0, 0] * rx + Ji[0, 1] * ry + Ji[0, 2] * rz
    wdy = Ji[1, 0] * rx + Ji[1, 1] * ry + Ji[1, 2] * rz
    wdz = Ji[2, 0] * rx + Ji[2, 1] * ry + Ji[2, 2] * rz

    return np.array([
        s[3], s[4], s[5],
        ax, ay, az,
        0.5 * (-q1 * wx - q2 * wy - q3 * wz),
        0.5 * (q0 * wx + q2 * wz - q3 * wy),
        0.5 * (q0 * wy - q1 * wz + q3 * wx),
        0.5 * (q0 * wz + q1 * wy - q2 * wx),
        wdx, wdy, wdz,
        d1, d2, d3, d4,
    ])


def advance(s, cmd, models, par, dt, nsub=1, t0=0.0):
    """Advance the packed state nsub RK4 steps of size dt from time t0."""
    wmin, wmax = par.omega_min, par.omega_max
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(nsub):
        t = t0 + i * dt
        k1 = _deriv(s, cmd, models, par, t)
        k2 = _deriv(s + half * k1, cmd, models, par, t + half)
        k3 = _deriv(s + half * k2, cmd, models, par, t + half)
        k4 = _deriv(s + dt * k3, cmd, models, par, t + dt)
        s = s + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        q0, q1, q2, q3 = s[6], s[7], s[8], s[9]
        qn = math.sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3)
        if not (qn > 0.0 and np.isfinite(s).all()):
            raise NonFinite(f"state became non-finite at t={t + dt:.6f}")
        s[6:10] /= qn
        for j in range(13, 17):
            if s[j] < wmin:
                s[j] = wmin
            elif s[j] > wmax:
                s[j] = wmax
    return s


def step(state, throttle, model, params, dt, esc_inverse, t=0.0,
         esc_scale=1.0, nsub=1):
    """Advance the plant nsub RK4 substeps of size dt under one throttle.

    esc_inverse maps throttle in [0, 1] to the motor speed the ESC will
    settle at; esc_scale models supply droop (battery) as a multiplier on
    that speed. The throttle is held for the whole call, so a 2 kHz
    control tick over 1/8000 s physics is dt=1/8000, nsub=4.
    """
    if model is None:
        models = ()
    elif isinstance(model, (list, tuple)):
        models = tuple(model)
    else:
        models = (model,)
    cmd = esc_scale * np.asarray(esc_inverse(np.asarray(throttle, dtype=float)))
    s = advance(state.pack(), cmd, models, params, dt, nsub, t)
    return VehicleState.unpack(s)


def true_acceleration(s, models, par, t):
    """Inertial acceleration of the packed state, for logging/metrics."""
    w = s[13:17]
    thrust = -par.k_thrust * float(w @ w)
    tau = thrust / par.mass
    q0, q1, q2, q3 = s[6], s[7], s[8], s[9]
    bz = np.array([2.0 * (q1 * q3 + q0 * q2),
                   2.0 * (q2 * q3 - q0 * q1),
                   1.0 - 2.0 * (q1 * q1 + q2 * q2)])
    fx, fy, fz, _, _, _ = _sum_models(models, t, s)
    a = tau * bz
    a[0] += fx / par.mass
    a[1] += fy / par.mass
    a[2] += par.gravity + fz / par.mass
    return a


@dataclass
class NoiseConfig:
    """Standard deviations of zero-mean Gaussian sensor noise (0 = clean)."""

    accel: float = 0.0   # m/s^2, per body axis
    gyro: float = 0.0    # rad/s, per body axis
    motor: float = 0.0   # rad/s, per motor
    pos: float = 0.0     # m, per inertial axis
    vel: float = 0.0     # m/s, per inertial axis

    def any(self):
        return (self.accel or self.gyro or self.motor or self.pos or self.vel)


@dataclass
class SensorSample:
    """What the controller sees each tick.

    accel_body is specific force in body axes (accelerometer convention:
    gravity-free fall reads zero, level hover reads (0, 0, -g)).
    """

    accel_body: np.ndarray
    rates: np.ndarray
    motor_speeds: np.ndarray
    att: np.ndarray
    pos: np.ndarray
    vel: np.ndarray


def sense(state, params, model=None, t=0.0, noise=None, rng=None):
    """Sample the sensors. Noise draws come from rng in a fixed order."""
    if isinstance(state, VehicleState):
        s = state.pack()
    else:
        s = np.asarray(state, dtype=float)
    if model is None:
        models = ()
    elif isinstance(model, (list, tuple)):
        models = tuple(model)
    else:
        models = (model,)

    w = s[13:17].copy()
    thrust = -params.k_thrust * float(w @ w)
    tau = thrust / params.mass
    fx, fy, fz, _, _, _ = _sum_models(models, t, s)
    q = s[6:10]
    q0, q1, q2, q3 = q
    # f_ext rotated into body axes, plus thrust along body z.
    tx = 2.0 * (fy * q3 - fz * q2)
    ty = 2.0 * (fz * q1 - fx * q3)
    tz = 2.0 * (fx * q2 - fy * q1)
    inv_m = 1.0 / params.mass
    accel_body = np.array([
        (fx + q0 * tx - q2 * tz + q3 * ty) * inv_m,
        (fy + q0 * ty - q3 * tx + q1 * tz) * inv_m,
        (fz + q0 * tz - q1 * ty + q2 * tx) * inv_m + tau,
    ])

    pos = s[0:3].copy()
    vel = s[3:6].copy()
    rates = s[10:13].copy()
    if noise is not None and noise.any():
        accel_body += rng.normal(0.0, 1.0, 3) * noise.accel
        rates += rng.normal(0.0, 1.0, 3) * noise.gyro
        w += rng.normal(0.0, 1.0, 4) * noise.motor
        pos += rng.normal(0.0, 1.0, 3) * noise.pos
        vel += rng.normal(0.0, 1.0, 3) * noise.vel
    return SensorSample(accel_body=accel_body, rates=rates, motor_speeds=w,
                        att=q.copy(), pos=pos, vel=vel)
