"""Measurement filtering for the incremental control loops.

Every feedback signal the controller differences against a command runs
through the same discrete second-order Butterworth low-pass, so all paths
carry identical phase lag and the increments stay consistent. The filters
are designed by bilinear transform with frequency prewarping, which pins
the -3 dB point exactly at the requested cutoff.

The bank produces, per 2 kHz tick:

  * acc:        filtered inertial acceleration (gravity restored before
                filtering, using the measured attitude)
  * thrust_vec: filtered specific-thrust vector tau * bz, built from motor
                speeds and measured attitude before filtering
  * rates:      filtered body rates
  * rates_dot:  filtered backward-difference of body rates
  * motor:      filtered motor speeds
  * moment/thrust_scalar: moments and specific thrust reconstructed from
                filtered squared motor speeds and filtered motor
                accelerations through the actuation matrices
"""

import math
from dataclasses import dataclass

import numpy as np

from . import quat
from .errors import BadCutoff

DEFAULT_CUTOFF = 188.5  # rad/s (30 Hz)


class Biquad:
    """Direct-form II transposed second-order section, vector channels."""

    def __init__(self, b0, b1, b2, a1, a2):
        self.b0, self.b1, self.b2 = b0, b1, b2
        self.a1, self.a2 = a1, a2
        self.s1 = 0.0
        self.s2 = 0.0

    @classmethod
    def butter2(cls, cutoff_rad_s, fs_hz):
        """Second-order Butterworth low-pass, prewarped bilinear transform."""
        if not (0.0 < cutoff_rad_s < math.pi * fs_hz):
            raise BadCutoff(
                f"cutoff {cutoff_rad_s} rad/s not in (0, pi*fs) at fs={fs_hz} Hz")
        k = math.tan(cutoff_rad_s / (2.0 * fs_hz))
        r = math.sqrt(2.0)
        a0 = 1.0 + r * k + k * k
        b0 = k * k / a0
        b1 = 2.0 * b0
        b2 = b0
        a1 = (2.0 * k * k - 2.0) / a0
        a2 = (1.0 - r * k + k * k) / a0
        f = cls(b0, b1, b2, a1, a2)
        poles = np.roots([1.0, a1, a2])
        if np.any(np.abs(poles) >= 1.0):
            raise BadCutoff("designed filter is not strictly stable")
        return f

    def reset(self, x0):
        """Warm start: seed delay states so a constant x0 passes through."""
        x0 = np.asarray(x0, dtype=float)
        self.s1 = (1.0 - self.b0) * x0
        self.s2 = (self.b2 - self.a2) * x0

    def update(self, x):
        y = self.b0 * x + self.s1
        self.s1 = self.b1 * x - self.a1 * y + self.s2
        self.s2 = self.b2 * x - self.a2 * y
        return y

    def dc_gain(self):
        return (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)

    def response(self, omega_rad_s, fs_hz):
        """Complex frequency response at omega (rad/s)."""
        z = np.exp(1j * np.asarray(omega_rad_s) / fs_hz)
        zi = 1.0 / z
        return ((self.b0 + self.b1 * zi + self.b2 * zi ** 2)
                / (1.0 + self.a1 * zi + self.a2 * zi ** 2))


@dataclass
class FilteredSignals:
    """One tick of filtered feedback, all lagged identically."""

    acc: np.ndarray            # m/s^2, inertial acceleration (xddot)
    thrust_vec: np.ndarray     # tau * bz, m/s^2, inertial
    rates: np.ndarray          # rad/s, body
    rates_dot: np.ndarray      # rad/s^2, body
    motor: np.ndarray          # rad/s
    moment: np.ndarray         # N m, body, from actuation model
    thrust_scalar: float       # m/s^2 (thrust / mass), negative
    thrust_scalar_dot: float   # m/s^3


class FilterBank:
    """All measurement filters plus the difference states they need."""

    def __init__(self, params, cutoff_rad_s=DEFAULT_CUTOFF, fs_hz=2000.0):
        self.params = params
        self.fs = fs_hz
        proto = Biquad.butter2(cutoff_rad_s, fs_hz)
        coef = (proto.b0, proto.b1, proto.b2, proto.a1, proto.a2)
        self.f_acc = Biquad(*coef)
        self.f_thrust_vec = Biquad(*coef)
        self.f_rates = Biquad(*coef)
        self.f_rates_dot = Biquad(*coef)
        self.f_motor = Biquad(*coef)
        self.f_motor_sq = Biquad(*coef)
        self.f_motor_dot = Biquad(*coef)
        self._prev_rates = None
        self._prev_motor = None
        self._prev_tau_f = None
        self._gvec = np.array([0.0, 0.0, params.gravity])

    def update(self, sample):
        par = self.params
        R = quat.rotmat(sample.att)
        acc_inertial = R @ sample.accel_body + self._gvec

        w = sample.motor_speeds
        tau = -(par.k_thrust / par.mass) * float(w @ w)
        thrust_vec = tau * R[:, 2]

        first = self._prev_rates is None
        if first:
            self.f_acc.reset(acc_inertial)
            self.f_thrust_vec.reset(thrust_vec)
            self.f_rates.reset(sample.rates)
            self.f_rates_dot.reset(np.zeros(3))
            self.f_motor.reset(w)
            self.f_motor_sq.reset(w * w)
            self.f_motor_dot.reset(np.zeros(4))
            self._prev_rates = sample.rates.copy()
            self._prev_motor = w.copy()

        rates_diff = (sample.rates - self._prev_rates) * self.fs
        motor_diff = (w - self._prev_motor) * self.fs
        self._prev_rates = sample.rates.copy()
        self._prev_motor = w.copy()

        acc_f = self.f_acc.update(acc_inertial)
        thrust_vec_f = self.f_thrust_vec.update(thrust_vec)
        rates_f = self.f_rates.update(sample.rates)
        rates_dot_f = self.f_rates_dot.update(rates_diff)
        motor_f = self.f_motor.update(w)
        motor_sq_f = self.f_motor_sq.update(w * w)
        motor_dot_f = self.f_motor_dot.update(motor_diff)

        mu_thrust = par.g1 @ motor_sq_f + par.g2 @ motor_dot_f
        tau_f = mu_thrust[3] / par.mass
        if self._prev_tau_f is None:
            tau_dot_f = 0.0
        else:
            tau_dot_f = (tau_f - self._prev_tau_f) * self.fs
        self._prev_tau_f = tau_f

        return FilteredSignals(acc=acc_f, thrust_vec=thrust_vec_f,
                               rates=rates_f, rates_dot=rates_dot_f,
                               motor=motor_f, moment=mu_thrust[:3],
                               thrust_scalar=tau_f,
                               thrust_scalar_dot=tau_dot_f)

    def external_force(self, signals):
        """Estimated external force m*(a_f - (tau bz)_f - g iz), in N."""
        return self.params.mass * (signals.acc - signals.thrust_vec - self._gvec)
