"""Discrete Butterworth filters and the measurement filter bank."""

import numpy as np
import numpy.testing as npt
import pytest
import scipy.signal

from quadtrack import quat
from quadtrack.dynamics import SensorSample
from quadtrack.errors import BadCutoff
from quadtrack.filters import Biquad, FilterBank
from quadtrack.vehicle import VehicleParams

FS = 2000.0
CUTOFF = 188.5


def test_coefficients_match_scipy():
    f = Biquad.butter2(CUTOFF, FS)
    b, a = scipy.signal.butter(2, CUTOFF / (np.pi * FS))
    npt.assert_allclose([f.b0, f.b1, f.b2], b, rtol=1e-12)
    npt.assert_allclose([1.0, f.a1, f.a2], a, rtol=1e-12)


def test_dc_gain_is_unity():
    f = Biquad.butter2(CUTOFF, FS)
    npt.assert_allclose(f.dc_gain(), 1.0, rtol=0, atol=1e-6)


def test_minus_3db_at_cutoff():
    f = Biquad.butter2(CUTOFF, FS)
    mag = np.abs(f.response(CUTOFF, FS))
    npt.assert_allclose(mag, 1.0 / np.sqrt(2.0), rtol=0.02)
    # Second-order rolloff: two decades above cutoff the gain has dropped
    # by roughly 80 dB (prewarping bends this slightly, allow slack).
    mag_hi = np.abs(f.response(CUTOFF * 100.0, FS))
    assert mag_hi < 2e-4


def test_response_matches_scipy_freqz():
    f = Biquad.butter2(CUTOFF, FS)
    w = np.logspace(-1, 3, 40)
    _, h = scipy.signal.freqz([f.b0, f.b1, f.b2], [1.0, f.a1, f.a2],
                              worN=w / FS)
    npt.assert_allclose(f.response(w, FS), h, rtol=1e-10)


def test_streamed_sinusoid_matches_response():
    f = Biquad.butter2(CUTOFF, FS)
    omega = 120.0
    expect = f.response(omega, FS)
    n = np.arange(int(FS) * 4)
    x = np.sin(omega * n / FS)
    y = np.array([f.update(v) for v in x])
    # Compare the settled tail against the analytic amplitude and phase.
    tail = slice(-2000, None)
    ref = np.abs(expect) * np.sin(omega * n / FS + np.angle(expect))
    npt.assert_allclose(y[tail], ref[tail], rtol=0, atol=1e-6)


def test_step_settles_to_input():
    f = Biquad.butter2(CUTOFF, FS)
    y = 0.0
    for _ in range(2000):
        y = f.update(1.0)
    npt.assert_allclose(y, 1.0, rtol=0, atol=1e-9)


def test_warm_start_passes_constant():
    rng = np.random.default_rng(31)
    for _ in range(20):
        x0 = rng.standard_normal(3)
        f = Biquad.butter2(CUTOFF, FS)
        f.reset(x0)
        for _ in range(50):
            y = f.update(x0)
        npt.assert_allclose(y, x0, rtol=0, atol=1e-12)


def test_impulse_response_matches_lfilter():
    f = Biquad.butter2(CUTOFF, FS)
    x = np.zeros(400)
    x[0] = 1.0
    y = np.array([f.update(v) for v in x])
    ref = scipy.signal.lfilter([f.b0, f.b1, f.b2], [1.0, f.a1, f.a2], x)
    npt.assert_allclose(y, ref, rtol=0, atol=1e-14)


def test_bad_cutoff_rejected():
    with pytest.raises(BadCutoff):
        Biquad.butter2(0.0, FS)
    with pytest.raises(BadCutoff):
        Biquad.butter2(np.pi * FS, FS)


def hover_sample(params, att=None):
    if att is None:
        att = np.array([1.0, 0, 0, 0])
    w = np.full(4, params.hover_speed)
    accel_body = quat.rotate_inverse(att, np.array([0.0, 0, -params.gravity]))
    return SensorSample(pos=np.zeros(3), vel=np.zeros(3), att=att,
                        rates=np.zeros(3), motor_speeds=w,
                        accel_body=accel_body)


def test_bank_hover_equilibrium():
    params = VehicleParams()
    bank = FilterBank(params)
    for _ in range(100):
        sig = bank.update(hover_sample(params))
    npt.assert_allclose(sig.acc, np.zeros(3), atol=1e-10)
    npt.assert_allclose(sig.thrust_vec, [0, 0, -params.gravity], rtol=1e-10)
    npt.assert_allclose(sig.rates, np.zeros(3), atol=0)
    npt.assert_allclose(sig.motor, np.full(4, params.hover_speed), rtol=1e-12)
    npt.assert_allclose(sig.moment, np.zeros(3), atol=1e-9)
    npt.assert_allclose(sig.thrust_scalar, -params.gravity, rtol=1e-10)
    npt.assert_allclose(bank.external_force(sig), np.zeros(3), atol=1e-9)


def test_bank_gravity_reconstruction_tilted():
    # The accelerometer never sees gravity; the bank must add it back in
    # inertial axes through the measured attitude, for any attitude.
    params = VehicleParams()
    rng = np.random.default_rng(32)
    for _ in range(20):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        bank = FilterBank(params)
        sample = hover_sample(params, att=q)
        sample.motor_speeds = np.zeros(4)
        for _ in range(50):
            sig = bank.update(sample)
        npt.assert_allclose(sig.acc, np.zeros(3), atol=1e-9)


def test_bank_identical_lag_across_channels():
    # Drive two channels with the same sinusoid; outputs must coincide
    # sample by sample since every filter shares one coefficient set.
    params = VehicleParams()
    bank = FilterBank(params)
    out_a, out_r = [], []
    gvec = np.array([0.0, 0, params.gravity])
    for n in range(800):
        v = 0.2 * np.sin(50.0 * n / FS)
        sample = SensorSample(pos=np.zeros(3), vel=np.zeros(3),
                              att=np.array([1.0, 0, 0, 0]),
                              rates=np.array([v, 0, 0]),
                              motor_speeds=np.zeros(4),
                              accel_body=np.array([v, 0, 0]) - gvec)
        sig = bank.update(sample)
        out_a.append(sig.acc[0])
        out_r.append(sig.rates[0])
    npt.assert_allclose(out_a, out_r, rtol=0, atol=1e-12)


def test_bank_external_force_step():
    # A 1 m/s^2 inertial acceleration with hover thrust reads as an
    # external force of mass newtons once the filters settle.
    params = VehicleParams()
    bank = FilterBank(params)
    sample = hover_sample(params)
    bank.update(sample)
    sample.accel_body = sample.accel_body + np.array([1.0, 0, 0])
    for _ in range(2000):
        sig = bank.update(sample)
    npt.assert_allclose(bank.external_force(sig),
                        [params.mass, 0.0, 0.0], rtol=0, atol=1e-9)
