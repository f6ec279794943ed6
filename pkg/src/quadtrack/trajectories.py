"""Built-in reference trajectories.

Each trajectory produces a flatness.ReferenceSample with analytic
derivatives through snap, which the feedforward transform requires to be
exact. Positions are inertial NED, so flight altitude is a negative z.
"""

import math

import numpy as np
from scipy.special import spence

from .errors import ScenarioError
from .flatness import ReferenceSample

_LN2 = math.log(2.0)
_PI2_12 = math.pi ** 2 / 12.0


class Hover:
    """Fixed position and heading."""

    def __init__(self, pos=(0.0, 0.0, -1.5), yaw=0.0):
        self.pos = np.asarray(pos, dtype=float)
        self.yaw = float(yaw)

    def sample(self, t):
        z = np.zeros(3)
        return ReferenceSample(pos=self.pos.copy(), vel=z, acc=z.copy(),
                               jerk=z.copy(), snap=z.copy(), yaw=self.yaw,
                               yaw_rate=0.0, yaw_acc=0.0)


class Roulette:
    """Planar multi-sinusoid curve with fast successive turns.

        x = r1 cos(k1 t) + r2 cos(k2 t) + r3 sin(k3 t)
        y = -r4 sin(k1 t) + r3 sin(k2 t) + r5 cos(k3 t)

    at constant altitude and zero heading. One lap takes 2 pi / k1. The
    conventional constant set includes an r6 that the curve definition
    never uses; it is accepted and ignored for compatibility.
    """

    def __init__(self, r=(6.0, 1.8, 0.6, 2.25, -0.3, -0.45),
                 k=(0.28, 2.8, 1.4), z=-1.5, yaw=0.0):
        r = tuple(float(v) for v in r)
        k = tuple(float(v) for v in k)
        if len(r) not in (5, 6) or len(k) != 3:
            raise ValueError("need radii r1..r5 (r6 optional) and rates k1..k3")
        if min(k) <= 0.0:
            raise ValueError("angular rates must be positive")
        half_pi = 0.5 * math.pi
        # Terms as (amplitude, rate, phase) of a*cos(k*t + p); the n-th
        # derivative is then a*k^n*cos(k*t + p + n*pi/2).
        self._x_terms = ((r[0], k[0], 0.0), (r[1], k[1], 0.0),
                         (r[2], k[2], -half_pi))
        self._y_terms = ((r[3], k[0], half_pi), (r[2], k[1], -half_pi),
                         (r[4], k[2], 0.0))
        self.r = r
        self.k = k
        self.z = float(z)
        self.yaw = float(yaw)

    @property
    def period(self):
        return 2.0 * math.pi / self.k[0]

    def _eval(self, terms, t, order):
        acc = 0.0
        shift = order * 0.5 * math.pi
        for a, k, p in terms:
            acc += a * k ** order * math.cos(k * t + p + shift)
        return acc

    def sample(self, t):
        out = []
        for order in range(5):
            out.append(np.array([self._eval(self._x_terms, t, order),
                                 self._eval(self._y_terms, t, order),
                                 self.z if order == 0 else 0.0]))
        return ReferenceSample(pos=out[0], vel=out[1], acc=out[2],
                               jerk=out[3], snap=out[4], yaw=self.yaw,
                               yaw_rate=0.0, yaw_acc=0.0)


def _log_cosh(u):
    au = abs(u)
    return au - _LN2 + math.log1p(math.exp(-2.0 * au))


def _dilog(w):
    # Li2(w) in the polylogarithm convention.
    return spence(1.0 - w)


def _int_log_cosh(u):
    """Integral of log(cosh(w)) dw from 0 to u, closed form, odd in u."""
    au = abs(u)
    val = 0.5 * au * au - au * _LN2 \
        + 0.5 * (_PI2_12 + _dilog(-math.exp(-2.0 * au)))
    return math.copysign(val, u)


class TanhAccel:
    """Straight-line run along +x with a smooth 0-to-1 m/s^2 accel ramp.

    a_x(t) = (tanh(c t - 2 pi) + 1) / 2 with c = 4 pi / 3, which is zero
    to within 4e-6 at t = 0 and one at t = 3. Velocity and position come
    from the closed-form integrals (via the dilogarithm), keeping the
    trajectory exactly consistent with its own derivatives. Starts at
    rest at the origin of the given altitude.
    """

    C = 4.0 * math.pi / 3.0
    U0 = -2.0 * math.pi

    def __init__(self, z=-1.5, yaw=0.0):
        self.z = float(z)
        self.yaw = float(yaw)
        self._lc0 = _log_cosh(self.U0)
        self._g0 = _int_log_cosh(self.U0)

    def scalars(self, t):
        """(x, v, a, j, s) along the run direction at time t."""
        c = self.C
        u = c * t + self.U0
        sech = 2.0 * math.exp(-abs(u)) / (1.0 + math.exp(-2.0 * abs(u)))
        sech2 = sech * sech
        a = 0.5 * (math.tanh(u) + 1.0)
        j = 0.5 * c * sech2
        sn = -c * c * sech2 * math.tanh(u)
        v = (_log_cosh(u) - self._lc0) / (2.0 * c) + 0.5 * t
        x = (_int_log_cosh(u) - self._g0) / (2.0 * c * c) \
            - self._lc0 * t / (2.0 * c) + 0.25 * t * t
        return x, v, a, j, sn

    def sample(self, t):
        x, v, a, j, sn = self.scalars(t)
        return ReferenceSample(pos=np.array([x, 0.0, self.z]),
                               vel=np.array([v, 0.0, 0.0]),
                               acc=np.array([a, 0.0, 0.0]),
                               jerk=np.array([j, 0.0, 0.0]),
                               snap=np.array([sn, 0.0, 0.0]),
                               yaw=self.yaw, yaw_rate=0.0, yaw_acc=0.0)


class Sampled:
    """Reference interpolated from tabulated waypoints.

    Expects strictly increasing times and position columns; derivatives
    are produced by repeated numerical differentiation at load, so the
    table should be smooth and densely sampled. Intended as an escape
    hatch for externally generated trajectories, not a primary path.
    """

    def __init__(self, times, pos, yaw=None, path=None):
        times = np.asarray(times, dtype=float)
        pos = np.asarray(pos, dtype=float)
        if times.ndim != 1 or len(times) < 5:
            raise ScenarioError("sampled trajectory needs at least 5 rows",
                                path=path)
        if np.any(np.diff(times) <= 0.0):
            raise ScenarioError("sampled trajectory times must increase",
                                path=path)
        if pos.shape != (len(times), 3):
            raise ScenarioError("sampled trajectory needs x,y,z columns",
                                path=path)
        self.times = times
        cols = [pos]
        for _ in range(4):
            cols.append(np.gradient(cols[-1], times, axis=0))
        self._derivs = cols
        if yaw is None:
            yaw = np.zeros(len(times))
        self.yaw = np.asarray(yaw, dtype=float)
        self._yaw_rate = np.gradient(self.yaw, times)
        self._yaw_acc = np.gradient(self._yaw_rate, times)

    @classmethod
    def from_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        names = data.dtype.names
        if names is None or not {"t", "x", "y", "z"} <= set(names):
            raise ScenarioError("sampled trajectory CSV needs t,x,y,z header",
                                path=str(path))
        pos = np.column_stack([data["x"], data["y"], data["z"]])
        yaw = data["yaw"] if "yaw" in names else None
        return cls(data["t"], pos, yaw, path=str(path))

    def _interp(self, col, t):
        return np.array([np.interp(t, self.times, col[:, i])
                         for i in range(3)])

    def sample(self, t):
        d = self._derivs
        return ReferenceSample(
            pos=self._interp(d[0], t), vel=self._interp(d[1], t),
            acc=self._interp(d[2], t), jerk=self._interp(d[3], t),
            snap=self._interp(d[4], t),
            yaw=float(np.interp(t, self.times, self.yaw)),
            yaw_rate=float(np.interp(t, self.times, self._yaw_rate)),
            yaw_acc=float(np.interp(t, self.times, self._yaw_acc)))
