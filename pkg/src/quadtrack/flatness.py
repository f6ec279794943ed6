"""Differential-flatness reference expansion.

A quadrotor's trajectory is determined by its position and heading as
functions of time. This module turns a reference sample carrying position
derivatives up to snap plus heading derivatives up to second order into
the attitude, specific thrust, body rates, and body accelerations the
vehicle must fly, by inverting

    jerk  = tau R [iz]x^T W + taudot bz
    snap  = R (tauddot iz + (2 taudot + tau [W]x) [iz]x^T W + tau [iz]x^T Wdot)
    yawd  = S W
    yawdd = S Wdot + Sdot W

for [W; taudot] and [Wdot; tauddot]. S maps body rates to heading rate; it
degenerates when the body x axis is vertical, and the whole expansion
degenerates in free fall where the thrust direction is undefined.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import FreeFallSingular, Singular, YawSingular

# Commanded specific force below this has no usable direction.
THRUST_EPS = 1e-3
# Reject feedforward solves on matrices with 1-norm condition above this.
COND_MAX = 1e8

_IZXT = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


@dataclass
class ReferenceSample:
    """One instant of the reference trajectory (inertial NED axes)."""

    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    jerk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    snap: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    yaw_rate: float = 0.0
    yaw_acc: float = 0.0


@dataclass
class Feedforward:
    """Attitude/rate/acceleration targets expanded from a reference."""

    R: np.ndarray
    tau: float
    rates: np.ndarray
    tau_dot: float
    rates_dot: np.ndarray
    tau_ddot: float


def reference_attitude(a_ref, yaw_ref, gravity):
    """Attitude and specific thrust that realize a reference acceleration.

    Returns (R, tau) with R body->inertial and tau = T/m < 0. The body z
    axis opposes the required specific force a_ref - g iz; body x is
    chosen so the heading equals yaw_ref.
    """
    t_vec = np.array([a_ref[0], a_ref[1], a_ref[2] - gravity])
    n = np.linalg.norm(t_vec)
    if n <= THRUST_EPS:
        raise FreeFallSingular("reference acceleration is ballistic; "
                               "thrust direction undefined")
    tau = -n
    bz = t_vec / tau
    if abs(bz[2]) <= 1e-6:
        raise YawSingular("reference thrust is horizontal; heading undefined")
    r = np.array([np.cos(yaw_ref), np.sin(yaw_ref), 0.0])
    # Tilt r out of the horizontal plane until it is orthogonal to bz; its
    # horizontal direction (the heading) is untouched.
    c = r.copy()
    c[2] = -(r @ bz) / bz[2]
    bx = c / np.linalg.norm(c)
    by = np.cross(bz, bx)
    return np.column_stack((bx, by, bz)), float(tau)


def yaw_rate_row(R):
    """Row vector S with yaw_rate = S @ W for body rates W."""
    bx, by, bz = R[:, 0], R[:, 1], R[:, 2]
    n = bx[0] * bx[0] + bx[1] * bx[1]
    if n <= 1e-12:
        raise YawSingular("body x axis is vertical; heading rate undefined")
    return np.array([0.0,
                     (bx[1] * bz[0] - bx[0] * bz[1]) / n,
                     (bx[0] * by[1] - bx[1] * by[0]) / n])


def yaw_rate_row_dot(R, W):
    """Time derivative of yaw_rate_row along Rdot = R [W]x."""
    bx, by, bz = R[:, 0], R[:, 1], R[:, 2]
    wx, wy, wz = W
    # Columns of R [W]x: derivatives of the body axes.
    bxd = R @ np.array([0.0, wz, -wy])
    byd = R @ np.array([-wz, 0.0, wx])
    bzd = R @ np.array([wy, -wx, 0.0])
    n = bx[0] * bx[0] + bx[1] * bx[1]
    if n <= 1e-12:
        raise YawSingular("body x axis is vertical; heading rate undefined")
    nd = 2.0 * (bx[0] * bxd[0] + bx[1] * bxd[1])
    u2 = bx[1] * bz[0] - bx[0] * bz[1]
    u2d = bxd[1] * bz[0] + bx[1] * bzd[0] - bxd[0] * bz[1] - bx[0] * bzd[1]
    u3 = bx[0] * by[1] - bx[1] * by[0]
    u3d = bxd[0] * by[1] + bx[0] * byd[1] - bxd[1] * by[0] - bx[1] * byd[0]
    return np.array([0.0,
                     (u2d * n - u2 * nd) / (n * n),
                     (u3d * n - u3 * nd) / (n * n)])


def _system_inverse(R, tau):
    A = np.empty((4, 4))
    A[:3, :3] = tau * (R @ _IZXT)
    A[:3, 3] = R[:, 2]
    A[3, :3] = yaw_rate_row(R)
    A[3, 3] = 0.0
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as e:
        raise Singular("flatness system matrix is singular") from e
    cond = np.abs(A).sum(axis=0).max() * np.abs(Ainv).sum(axis=0).max()
    if cond > COND_MAX:
        raise Singular(f"flatness system matrix condition {cond:.3g} too large")
    return Ainv


def angular_rate_ref(j_ref, yaw_rate_ref, R, tau):
    """Body rates and thrust-scalar rate realizing a reference jerk."""
    Ainv = _system_inverse(R, tau)
    rhs = np.array([j_ref[0], j_ref[1], j_ref[2], yaw_rate_ref])
    sol = Ainv @ rhs
    return sol[:3], float(sol[3])


def angular_accel_ref(s_ref, yaw_acc_ref, R, tau, tau_dot, W):
    """Body accelerations and thrust-scalar acceleration for a snap."""
    Ainv = _system_inverse(R, tau)
    izw = _IZXT @ W
    coupling = R @ (2.0 * tau_dot * izw + tau * np.cross(W, izw))
    srow_dot = yaw_rate_row_dot(R, W)
    rhs = np.array([s_ref[0] - coupling[0],
                    s_ref[1] - coupling[1],
                    s_ref[2] - coupling[2],
                    yaw_acc_ref - float(srow_dot @ W)])
    sol = Ainv @ rhs
    return sol[:3], float(sol[3])


def feedforward(ref, gravity, frame=None):
    """Full feedforward expansion of a reference sample.

    By default the expansion is evaluated on the reference-derived frame.
    Passing frame=(R, tau, W, tau_dot) evaluates it on a measured state
    instead (experimental alternative; noisier but tolerant of large
    tracking errors).
    """
    if frame is None:
        R, tau = reference_attitude(ref.acc, ref.yaw, gravity)
        Ainv = _system_inverse(R, tau)
        rhs = np.array([ref.jerk[0], ref.jerk[1], ref.jerk[2], ref.yaw_rate])
        sol = Ainv @ rhs
        rates, tau_dot = sol[:3], float(sol[3])
        W = rates
    else:
        R, tau, W, tau_dot = frame
        Ainv = _system_inverse(R, tau)
        rhs = np.array([ref.jerk[0], ref.jerk[1], ref.jerk[2], ref.yaw_rate])
        sol = Ainv @ rhs
        rates = sol[:3]

    izw = _IZXT @ W
    coupling = R @ (2.0 * tau_dot * izw + tau * np.cross(W, izw))
    srow_dot = yaw_rate_row_dot(R, W)
    rhs2 = np.array([ref.snap[0] - coupling[0],
                     ref.snap[1] - coupling[1],
                     ref.snap[2] - coupling[2],
                     ref.yaw_acc - float(srow_dot @ W)])
    sol2 = Ainv @ rhs2
    return Feedforward(R=R, tau=tau, rates=rates, tau_dot=tau_dot,
                       rates_dot=sol2[:3], tau_ddot=float(sol2[3]))
