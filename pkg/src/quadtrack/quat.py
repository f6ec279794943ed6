"""Quaternion and rotation helpers.

Conventions used throughout the package:

* Inertial frame is North-East-Down (NED): +z points down, so gravity is
  +g along the inertial z axis and "up" is negative z.
* Quaternions are Hamilton, scalar first: q = [w, x, y, z], stored as
  length-4 numpy arrays. A unit quaternion q maps body coordinates to
  inertial coordinates via R(q) u = q * u * q^-1.
* The body z axis points down through the belly of the vehicle; total
  rotor thrust acts along -body-z, so the thrust scalar is negative.

Functions are written with unrolled scalar arithmetic because they sit in
the 8 kHz integration loop.
"""

import math

import numpy as np

from .errors import YawSingular

# Heading is treated as undefined when the horizontal projection of the
# body x axis is shorter than this.
YAW_EPS = 1e-6

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def mul(p, q):
    """Hamilton product p * q."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return np.asarray(q, dtype=float) / n


def canonicalize(q):
    """Flip sign so the scalar part is nonnegative (same rotation)."""
    if q[0] < 0.0:
        return -np.asarray(q)
    return np.asarray(q)


def rotate(q, u):
    """Rotate vector u from body to inertial coordinates: R(q) u."""
    w, x, y, z = q
    ux, uy, uz = u
    # Expansion of q * [0, u] * conj(q) for unit q.
    tx = 2.0 * (y * uz - z * uy)
    ty = 2.0 * (z * ux - x * uz)
    tz = 2.0 * (x * uy - y * ux)
    return np.array([
        ux + w * tx + y * tz - z * ty,
        uy + w * ty + z * tx - x * tz,
        uz + w * tz + x * ty - y * tx,
    ])


def rotate_inverse(q, u):
    """Rotate vector u from inertial to body coordinates: R(q)^T u."""
    w, x, y, z = q
    ux, uy, uz = u
    # rotate() with q conjugated: both cross products change sign.
    tx = 2.0 * (uy * z - uz * y)
    ty = 2.0 * (uz * x - ux * z)
    tz = 2.0 * (ux * y - uy * x)
    return np.array([
        ux + w * tx - y * tz + z * ty,
        uy + w * ty - z * tx + x * tz,
        uz + w * tz - x * ty + y * tx,
    ])


def rotmat(q):
    """3x3 rotation matrix (body -> inertial) of a unit quaternion."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def from_rotmat(R):
    """Unit quaternion of a rotation matrix (Shepperd's method)."""
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    return canonicalize(normalize(q))


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / math.sqrt(axis @ axis)
    h = 0.5 * angle
    s = math.sin(h)
    return np.array([math.cos(h), s * axis[0], s * axis[1], s * axis[2]])


def body_x(q):
    """First column of R(q): the body x axis in inertial coordinates."""
    w, x, y, z = q
    return np.array([1.0 - 2.0 * (y * y + z * z),
                     2.0 * (x * y + w * z),
                     2.0 * (x * z - w * y)])


def body_z(q):
    """Third column of R(q): the body z axis in inertial coordinates."""
    w, x, y, z = q
    return np.array([2.0 * (x * z + w * y),
                     2.0 * (y * z - w * x),
                     1.0 - 2.0 * (x * x + y * y)])


def yaw_of(q):
    """Heading: angle from inertial x to the horizontal projection of body x.

    Raises YawSingular when body x is within YAW_EPS of vertical, where the
    projection degenerates.
    """
    bx = body_x(q)
    if math.hypot(bx[0], bx[1]) <= YAW_EPS:
        raise YawSingular("body x axis is vertical; heading undefined")
    return math.atan2(bx[1], bx[0])
