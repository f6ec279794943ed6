"""Small-signal response analysis of the control loops about hover.

Everything here works on rational transfer functions in the Laplace
variable, built from the same parameters and gains the time-domain
controller uses. One horizontal axis is modeled: translation couples to
rotation about the orthogonal axis, the measurement filter appears
wherever the controller consumes a filtered signal, and the motor lag
stands in for the whole actuation chain.

The incremental loops give distinctive shapes: the actuation path
collapses to the bare motor lag when the control model is exact, and
constant force or moment disturbances leave no steady-state offset. The
non-incremental variants keep the model in the loop and show the
familiar static deflection instead.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import Unstable
from .filters import DEFAULT_CUTOFF
from .vehicle import ControlGains


def _trim(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    keep = len(c)
    while keep > 1 and abs(c[keep - 1]) <= 1e-14 * scale:
        keep -= 1
    return c[:keep].copy()


class RationalTF:
    """Rational function of s with real coefficients, ascending order.

    No common-factor cancellation is attempted; comparisons should
    cross-multiply. Arithmetic keeps denominators explicit.
    """

    def __init__(self, num, den):
        num = _trim(num)
        den = _trim(den)
        if np.max(np.abs(den)) == 0.0:
            raise ZeroDivisionError("zero denominator polynomial")
        lead = den[-1]
        self.num = num / lead
        self.den = den / lead

    def __repr__(self):
        return f"RationalTF(num={self.num!r}, den={self.den!r})"

    @staticmethod
    def constant(k):
        return RationalTF([k], [1.0])

    def __mul__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(npoly.polymul(self.num, other.num),
                              npoly.polymul(self.den, other.den))
        return RationalTF(self.num * other, self.den)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, RationalTF):
            other = RationalTF.constant(other)
        num = npoly.polyadd(npoly.polymul(self.num, other.den),
                            npoly.polymul(other.num, self.den))
        return RationalTF(num, npoly.polymul(self.den, other.den))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, RationalTF):
            other = RationalTF.constant(other)
        num = npoly.polysub(npoly.polymul(self.num, other.den),
                            npoly.polymul(other.num, self.den))
        return RationalTF(num, npoly.polymul(self.den, other.den))

    def __truediv__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(npoly.polymul(self.num, other.den),
                              npoly.polymul(self.den, other.num))
        return RationalTF(self.num / other, self.den)

    def feedback(self, other=None):
        """Closed loop self / (1 + self*other); unity feedback by default."""
        if other is None:
            other = RationalTF.constant(1.0)
        num = npoly.polymul(self.num, other.den)
        den = npoly.polyadd(npoly.polymul(self.den, other.den),
                            npoly.polymul(self.num, other.num))
        return RationalTF(num, den)

    def at(self, s):
        return npoly.polyval(s, self.num) / npoly.polyval(s, self.den)

    def freq(self, omega):
        return self.at(1j * np.asarray(omega, dtype=float))

    def dc(self):
        if abs(self.den[0]) <= 1e-300:
            return math.inf * math.copysign(1.0, self.num[0])
        return self.num[0] / self.den[0]

    def poles(self):
        return np.roots(self.den[::-1])

    def is_stable(self, margin=0.0):
        p = self.poles()
        return bool(len(p) == 0 or np.max(p.real) < -margin)

    def agrees_with(self, other, rel=1e-9, n=50):
        """Cross-multiplied comparison plus a frequency-response sweep."""
        a = npoly.polymul(self.num, other.den)
        b = npoly.polymul(other.num, self.den)
        diff = npoly.polysub(a, b)
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        if np.max(np.abs(diff)) > 1e-12 * scale:
            return False
        w = np.logspace(-2, 4, n)
        ra, rb = self.freq(w), other.freq(w)
        ref = np.maximum(np.abs(ra), np.abs(rb)) + 1e-12
        return bool(np.max(np.abs(ra - rb) / ref) <= rel)


def measurement_filter(cutoff_rad_s=DEFAULT_CUTOFF):
    """Continuous prototype of the second-order low-pass used everywhere."""
    wc = cutoff_rad_s
    return RationalTF([wc * wc], [wc * wc, math.sqrt(2.0) * wc, 1.0])


def motor_lag(tau):
    return RationalTF([1.0], [1.0, tau])


def s_times(tf, power=1):
    num = np.concatenate([np.zeros(power), tf.num])
    return RationalTF(num, tf.den)


def _inner_loop_polys(tau, cutoff_rad_s, model_scale, incremental):
    """Numerator/denominator pairs of the actuation loop building blocks.

    Everything downstream is assembled from explicit polynomials over a
    shared denominator. Generic rational arithmetic is avoided here on
    purpose: repeated additions pile up huge common factors that poison
    root finding and state-space realizations, even though pointwise
    frequency evaluation would still look fine.
    """
    wc = cutoff_rad_s
    hn = np.array([wc * wc])
    hd = np.array([wc * wc, math.sqrt(2.0) * wc, 1.0])
    mn = np.array([1.0])
    md = np.array([1.0, tau])
    if incremental:
        ga_n = model_scale * npoly.polymul(mn, hd)
        ga_d = npoly.polyadd(npoly.polymul(md, hd),
                             (model_scale - 1.0) * npoly.polymul(mn, hn))
    else:
        ga_n = model_scale * mn
        ga_d = md
    return hn, hd, mn, md, ga_n, ga_d


def actuation_response(tau, cutoff_rad_s, model_scale=1.0, incremental=True):
    """Achieved over commanded for one inverted axis.

    model_scale is the ratio of the control model's effectiveness
    parameter to the true one. The incremental loop feeds back the
    filtered achieved value, so an exact model (scale 1) reduces the
    whole path to the motor lag after cancellation.
    """
    hn, hd, mn, md, ga_n, ga_d = _inner_loop_polys(
        tau, cutoff_rad_s, model_scale, incremental)
    return RationalTF(ga_n, ga_d)


def disturbance_response(tau, cutoff_rad_s, inertia, model_scale=1.0,
                         incremental=True):
    """Angular acceleration per external moment under the inner loop."""
    if not incremental:
        return RationalTF([1.0 / inertia], [1.0])
    hn, hd, mn, md, ga_n, ga_d = _inner_loop_polys(
        tau, cutoff_rad_s, model_scale, True)
    num = npoly.polysub(npoly.polymul(md, hd), npoly.polymul(mn, hn))
    return RationalTF(num / inertia, ga_d)


@dataclass
class LinearLoop:
    """Transfer functions of one translational axis near hover."""

    actuation: RationalTF          # achieved accel per commanded accel (inner)
    moment_path: RationalTF        # angular accel per external moment
    accel_tracking: RationalTF     # achieved accel per reference accel
    position_from_force: RationalTF
    position_from_moment: RationalTF


def build_linear_loop(params, gains=None, cutoff_rad_s=DEFAULT_CUTOFF,
                      model_scale=1.0, feedforward=True, incremental=True,
                      axis=0):
    """Assemble the loop transfer functions for one horizontal axis.

    axis selects the translational direction; the paired rotation axis
    and its gains/inertia follow from it.
    """
    if gains is None:
        gains = ControlGains()
    rot = 1 - axis
    k_th = gains.att[rot]
    k_q = gains.rate[rot]
    k_x = gains.pos[axis]
    k_v = gains.vel[axis]
    k_a = gains.acc[axis]
    inertia = params.inertia[rot, rot]

    hn, hd, mn, md, ga_n, ga_d = _inner_loop_polys(
        params.motor_tau, cutoff_rad_s, model_scale, incremental)
    gmu = disturbance_response(params.motor_tau, cutoff_rad_s, inertia,
                               model_scale, incremental)
    pm = npoly.polymul
    s1 = np.array([0.0, 1.0])
    s2 = np.array([0.0, 0.0, 1.0])

    # Attitude loop over the common denominator ga_d*hd: error on the raw
    # attitude, rate feedback filtered.
    # att_den = s^2 + Ga*k_q*H*s + Ga*k_th
    na = npoly.polyadd(
        npoly.polyadd(pm(s2, pm(ga_d, hd)), k_q * pm(s1, pm(ga_n, hn))),
        k_th * pm(ga_n, hd))
    ff = 1.0 if feedforward else 0.0
    accel_tracking = RationalTF(
        pm(pm(ga_n, hd), [k_th, ff * k_q, ff]), na)

    # Position regulator p_reg = k_x + k_v*s + k_a*H*s^2, over hd.
    np_reg = npoly.polyadd(pm([k_x, k_v], hd), k_a * pm(s2, hn))

    # Loop denominator s^2*att_den + Ga*k_th*p_reg, over ga_d*hd.
    nd = npoly.polyadd(pm(s2, na), k_th * pm(ga_n, np_reg))
    if incremental:
        # Increments ride on the filtered thrust vector, which removes
        # the DC stiffness of the force path entirely.
        num_f = npoly.polysub(na, k_th * pm(ga_n, hn)) / params.mass
    else:
        num_f = na / params.mass
    position_from_force = RationalTF(num_f, nd)
    # x/mu = -g * Gmu / (loop denominator); Gmu shares ga_d when
    # incremental, so only hd (or ga_d itself for the direct law) remains.
    if incremental:
        gm_n = npoly.polysub(pm(md, hd), pm(mn, hn)) / inertia
        num_mu = -params.gravity * pm(gm_n, hd)
    else:
        num_mu = (-params.gravity / inertia) * pm(ga_d, hd)
    position_from_moment = RationalTF(num_mu, nd)

    return LinearLoop(actuation=RationalTF(ga_n, ga_d), moment_path=gmu,
                      accel_tracking=accel_tracking,
                      position_from_force=position_from_force,
                      position_from_moment=position_from_moment)


def _state_space(tf):
    """Controllable canonical realization (A, B, C, D)."""
    den = tf.den
    num = tf.num
    n = len(den) - 1
    if len(num) > len(den):
        raise ValueError("improper transfer function")
    a_norm = den / den[-1]
    b_full = np.zeros(n + 1)
    b_full[:len(num)] = num / den[-1]
    d = b_full[n]
    if n == 0:
        return (np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
                float(d))
    a = np.zeros((n, n))
    a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = -a_norm[:n]
    b = np.zeros((n, 1))
    b[-1, 0] = 1.0
    c = (b_full[:n] - a_norm[:n] * d).reshape(1, n)
    return a, b, c, float(d)


def _rk4_matrices(a, b, h):
    """One-step transition operators for linearly interpolated input.

    x+ = phi x + g0 u(t) + gh u(t + h/2) + g1 u(t + h).
    """
    n = a.shape[0]
    eye = np.eye(n)
    cx1, c01, ch1, c11 = a, b, np.zeros_like(b), np.zeros_like(b)
    cx2 = a + 0.5 * h * (a @ cx1)
    c02 = 0.5 * h * (a @ c01)
    ch2 = b.copy()
    c12 = np.zeros_like(b)
    cx3 = a + 0.5 * h * (a @ cx2)
    c03 = 0.5 * h * (a @ c02)
    ch3 = 0.5 * h * (a @ ch2) + b
    c13 = np.zeros_like(b)
    cx4 = a + h * (a @ cx3)
    c04 = h * (a @ c03)
    ch4 = h * (a @ ch3)
    c14 = b.copy()
    w = h / 6.0
    phi = eye + w * (cx1 + 2.0 * cx2 + 2.0 * cx3 + cx4)
    g0 = w * (c01 + 2.0 * c02 + 2.0 * c03 + c04)
    gh = w * (ch1 + 2.0 * ch2 + 2.0 * ch3 + ch4)
    g1 = w * (c11 + 2.0 * c12 + 2.0 * c13 + c14)
    return phi, g0, gh, g1


def driven_response(tf, t, u, stability_margin=0.0):
    """Output samples for input samples u on the uniform grid t.

    The input is treated as piecewise linear between samples. Raises
    Unstable if the transfer function has poles at or right of the
    margin.
    """
    if not tf.is_stable(stability_margin):
        raise Unstable("transfer function has unstable poles")
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if t.ndim != 1 or t.shape != u.shape or len(t) < 2:
        raise ValueError("t and u must be matching 1-d arrays")
    h = t[1] - t[0]
    a, b, c, d = _state_space(tf)
    if a.shape[0] == 0:
        return d * u
    phi, g0, gh, g1 = _rk4_matrices(a, b, h)
    x = np.zeros((a.shape[0], 1))
    y = np.empty_like(u)
    y[0] = d * u[0]
    for k in range(len(t) - 1):
        um = 0.5 * (u[k] + u[k + 1])
        x = phi @ x + g0 * u[k] + gh * um + g1 * u[k + 1]
        y[k + 1] = (c @ x)[0, 0] + d * u[k + 1]
    return y


def step_response(tf, t_end, dt=1e-3, stability_margin=0.0):
    """Unit step response on a uniform grid; returns (t, y)."""
    n = int(round(t_end / dt))
    t = np.arange(n + 1) * dt
    y = driven_response(tf, t, np.ones(n + 1), stability_margin)
    return t, y


def step_metrics(t, y, final=None, band=0.02):
    """Rise time (10-90%), settling time into the band, overshoot ratio."""
    if final is None:
        final = y[-1]
    span = final
    if abs(span) <= 1e-300:
        raise ValueError("zero final value has no relative metrics")
    yn = y / span
    above10 = np.nonzero(yn >= 0.1)[0]
    above90 = np.nonzero(yn >= 0.9)[0]
    rise = (t[above90[0]] - t[above10[0]]) if len(above10) and len(above90) \
        else math.inf
    outside = np.nonzero(np.abs(yn - 1.0) > band)[0]
    settle = t[outside[-1] + 1] if len(outside) and outside[-1] + 1 < len(t) \
        else (math.inf if len(outside) else t[0])
    overshoot = max(0.0, np.max(yn) - 1.0)
    return rise, settle, overshoot


def tanh_accel_reference(t):
    """Smooth 0-to-1 m/s^2 acceleration profile used in tracking studies.

    a(t) = (tanh(4 pi t / 3 - 2 pi) + 1) / 2, effectively 0 at t = 0 and
    1 after about three seconds.
    """
    t = np.asarray(t, dtype=float)
    return 0.5 * (np.tanh(4.0 * math.pi * t / 3.0 - 2.0 * math.pi) + 1.0)


def tracking_response(tf_accel, t_end=6.0, dt=1e-3):
    """(t, reference, achieved) for the smooth acceleration profile."""
    n = int(round(t_end / dt))
    t = np.arange(n + 1) * dt
    ref = tanh_accel_reference(t)
    out = driven_response(tf_accel, t, ref)
    return t, ref, out
