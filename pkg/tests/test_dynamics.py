"""Plant model: rigid-body integration, disturbances, and sensors."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from quadtrack import quat
from quadtrack.dynamics import (AIR_DENSITY, BodyDrag, ConstantForce,
                                DragPlate, NoiseConfig, WirePull, advance,
                                disturbance_eval, sense, step,
                                true_acceleration)
from quadtrack.errors import NonFinite
from quadtrack.vehicle import VehicleParams, VehicleState

PARAMS = VehicleParams()
DT = 1.0 / 8000.0


def hover_state(params=PARAMS):
    return VehicleState(pos=np.array([0.0, 0.0, -1.5]),
                        motor_speeds=np.full(4, params.hover_speed))


def random_state(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return VehicleState(pos=rng.standard_normal(3),
                        vel=rng.standard_normal(3) * 2.0,
                        att=q,
                        rates=rng.standard_normal(3) * 3.0,
                        motor_speeds=rng.uniform(300.0, 2200.0, 4))


def test_free_fall():
    # Negligible rotor speed: gravity is the only force.
    par = VehicleParams(omega_min=1e-9)
    s = VehicleState(motor_speeds=np.full(4, 1e-9)).pack()
    cmd = np.full(4, 1e-9)
    t = 0.5
    n = int(round(t / DT))
    out = advance(s, cmd, (), par, DT, nsub=n)
    npt.assert_allclose(out[2], 0.5 * par.gravity * t * t, rtol=1e-9)
    npt.assert_allclose(out[5], par.gravity * t, rtol=1e-9)
    npt.assert_allclose(out[0:2], np.zeros(2), atol=1e-12)
    npt.assert_allclose(out[6:10], [1.0, 0, 0, 0], atol=1e-12)


def test_hover_fixed_point():
    s = hover_state().pack()
    cmd = np.full(4, PARAMS.hover_speed)
    out = advance(s, cmd, (), PARAMS, DT, nsub=8000)
    npt.assert_allclose(out, s, rtol=0, atol=1e-10)


def test_rk4_convergence_order():
    # Global error of a tumbling trajectory should fall ~16x per halving.
    rng = np.random.default_rng(50)
    s0 = random_state(rng).pack()
    cmd = rng.uniform(400.0, 2000.0, 4)
    t_end = 0.04

    def run(n):
        return advance(s0.copy(), cmd, (), PARAMS, t_end / n, nsub=n)

    ref = run(512)
    e1 = np.max(np.abs(run(16) - ref))
    e2 = np.max(np.abs(run(32) - ref))
    assert e1 > 0 and e2 > 0
    ratio = e1 / e2
    assert 10.0 < ratio < 25.0, f"observed order ratio {ratio}"


def test_velocity_slope_matches_true_acceleration():
    rng = np.random.default_rng(51)
    dist = ConstantForce(force=[0.5, -0.3, 0.2], moment=[0.01, 0.0, -0.02])
    for _ in range(20):
        st = random_state(rng)
        s = st.pack()
        cmd = s[13:17]
        # One tiny step: slope error is O(h * jerk), jerk is ~1e2 here.
        h = 1e-7
        out = advance(s.copy(), cmd, (dist,), PARAMS, h, nsub=1)
        slope = (out[3:6] - s[3:6]) / h
        npt.assert_allclose(slope, true_acceleration(s, (dist,), PARAMS, 0.0),
                            rtol=0, atol=3e-5)


def test_motor_first_order_lag():
    # With the body held conceptually (only watching motor states), the
    # speed response to a command step is exp(-t / tau_m).
    s = hover_state().pack()
    w0 = PARAMS.hover_speed
    cmd = np.full(4, w0 + 200.0)
    t = 0.02
    n = int(round(t / DT))
    out = advance(s, cmd, (), PARAMS, DT, nsub=n)
    expect = w0 + 200.0 * (1.0 - math.exp(-t / PARAMS.motor_tau))
    npt.assert_allclose(out[13:17], np.full(4, expect), rtol=1e-6)


def test_motor_speed_clipping():
    s = hover_state().pack()
    out = advance(s.copy(), np.full(4, 1e4), (), PARAMS, DT, nsub=400)
    assert np.all(out[13:17] <= PARAMS.omega_max + 1e-12)
    out = advance(s.copy(), np.zeros(4), (), PARAMS, DT, nsub=4000)
    assert np.all(out[13:17] >= PARAMS.omega_min - 1e-12)


def test_quaternion_stays_normalized():
    rng = np.random.default_rng(52)
    s = random_state(rng).pack()
    cmd = rng.uniform(400.0, 2000.0, 4)
    out = advance(s, cmd, (), PARAMS, DT, nsub=2000)
    npt.assert_allclose(np.linalg.norm(out[6:10]), 1.0, rtol=1e-12)


def test_advance_deterministic():
    rng = np.random.default_rng(53)
    s = random_state(rng).pack()
    cmd = rng.uniform(400.0, 2000.0, 4)
    a = advance(s.copy(), cmd, (), PARAMS, DT, nsub=100)
    b = advance(s.copy(), cmd, (), PARAMS, DT, nsub=100)
    assert np.array_equal(a, b)


def test_advance_raises_on_nonfinite():
    s = hover_state().pack()
    s[3] = np.nan
    with pytest.raises(NonFinite):
        advance(s, np.full(4, PARAMS.hover_speed), (), PARAMS, DT, nsub=1)


def test_step_esc_inverse_and_scale():
    # step() feeds throttle through esc_inverse and scales for droop; the
    # motors settle on the scaled speed.
    esc_inverse = lambda z: 2000.0 * z
    st = hover_state()
    out = step(st, np.full(4, 0.5), None, PARAMS, DT,
               esc_inverse, esc_scale=0.9, nsub=8000)
    npt.assert_allclose(out.motor_speeds, np.full(4, 900.0), rtol=1e-4)


def test_constant_force_window():
    d = ConstantForce(force=[1.0, 2.0, 3.0], moment=[0.1, 0.2, 0.3],
                      t_on=1.0, t_off=2.0)
    s = hover_state()
    f, m = disturbance_eval(d, s, 0.5)
    npt.assert_allclose(f, np.zeros(3), atol=0)
    f, m = disturbance_eval(d, s, 1.5)
    npt.assert_allclose(f, [1.0, 2.0, 3.0], atol=0)
    npt.assert_allclose(m, [0.1, 0.2, 0.3], atol=0)
    f, m = disturbance_eval(d, s, 2.5)
    npt.assert_allclose(f, np.zeros(3), atol=0)


def test_wire_pull_interpolation():
    w = WirePull(times=[1.0, 2.0, 6.0, 6.2],
                 forces=[[0, 0, 0], [3.33, 0, 1.61], [3.33, 0, 1.61],
                         [0, 0, 0]])
    npt.assert_allclose(w.force_at(0.5), (0.0, 0.0, 0.0), atol=0)
    npt.assert_allclose(w.force_at(1.5), (1.665, 0.0, 0.805), rtol=1e-12)
    npt.assert_allclose(w.force_at(4.0), (3.33, 0.0, 1.61), rtol=1e-12)
    npt.assert_allclose(w.force_at(6.1), (1.665, 0.0, 0.805), rtol=1e-9)
    npt.assert_allclose(w.force_at(7.0), (0.0, 0.0, 0.0), atol=0)
    # Magnitude during the hold.
    npt.assert_allclose(np.linalg.norm(w.force_at(3.0)), 3.6988, atol=5e-5)


def test_wire_pull_rejects_bad_times():
    with pytest.raises(ValueError):
        WirePull(times=[1.0, 1.0], forces=[[0, 0, 0], [1, 0, 0]])
    with pytest.raises(ValueError):
        WirePull(times=[1.0], forces=[[0, 0, 0]])


def test_drag_plate_level_flight():
    # Level attitude, 10 m/s along x into an x-normal plate:
    # f = -0.5 * rho * cd * A * v|v| along x.
    plate = DragPlate(area=0.0512, cd=1.2, normal=[1.0, 0, 0])
    s = VehicleState(vel=np.array([10.0, 0.0, 0.0]))
    f, m = disturbance_eval(plate, s, 0.0)
    expect = -0.5 * AIR_DENSITY * 1.2 * 0.0512 * 100.0
    npt.assert_allclose(f, [expect, 0.0, 0.0], rtol=1e-12)
    npt.assert_allclose(expect, -3.76320, rtol=1e-6)
    npt.assert_allclose(m, np.zeros(3), atol=0)
    # Reversed velocity reverses the force.
    s.vel = np.array([-10.0, 0.0, 0.0])
    f, _ = disturbance_eval(plate, s, 0.0)
    npt.assert_allclose(f, [-expect, 0.0, 0.0], rtol=1e-12)


def test_drag_plate_follows_attitude():
    # Yaw the body 90 deg: the x-normal plate now faces y, so x velocity
    # produces no load and y velocity produces the full load along y.
    plate = DragPlate(area=0.0512, cd=1.2, normal=[1.0, 0, 0])
    yaw90 = quat.from_axis_angle(np.array([0.0, 0, 1.0]), 0.5 * math.pi)
    s = VehicleState(vel=np.array([10.0, 0.0, 0.0]), att=yaw90)
    f, _ = disturbance_eval(plate, s, 0.0)
    npt.assert_allclose(f, np.zeros(3), atol=1e-9)
    s.vel = np.array([0.0, 10.0, 0.0])
    f, _ = disturbance_eval(plate, s, 0.0)
    expect = -0.5 * AIR_DENSITY * 1.2 * 0.0512 * 100.0
    npt.assert_allclose(f, [0.0, expect, 0.0], atol=1e-9)


def test_drag_plate_oracle_random_attitudes():
    rng = np.random.default_rng(54)
    plate = DragPlate(area=0.02, cd=1.1, normal=[0.0, 1.0, 0.0],
                      arm=[0.05, 0.0, -0.02])
    for _ in range(50):
        st = random_state(rng)
        f, m = disturbance_eval(plate, st, 0.0)
        n_world = quat.rotate(st.att, plate.normal)
        vn = st.vel @ n_world
        f_ref = -0.5 * AIR_DENSITY * 1.1 * 0.02 * abs(vn) * vn * n_world
        npt.assert_allclose(f, f_ref, rtol=0, atol=1e-12)
        mag = -0.5 * AIR_DENSITY * 1.1 * 0.02 * abs(vn) * vn
        npt.assert_allclose(m, mag * np.cross(plate.arm, plate.normal),
                            rtol=0, atol=1e-12)


def test_drag_plate_normalizes_normal():
    plate = DragPlate(normal=[2.0, 0.0, 0.0])
    npt.assert_allclose(plate.normal, [1.0, 0.0, 0.0], atol=0)


def test_body_drag():
    d = BodyDrag(c_lin=0.1, c_quad=0.02)
    s = VehicleState(vel=np.array([3.0, -4.0, 0.0]))
    f, m = disturbance_eval(d, s, 0.0)
    npt.assert_allclose(f, -(0.1 + 0.02 * 5.0) * s.vel, rtol=1e-12)
    npt.assert_allclose(m, np.zeros(3), atol=0)


def test_disturbances_sum():
    d1 = ConstantForce(force=[1.0, 0.0, 0.0])
    d2 = ConstantForce(force=[0.0, 2.0, 0.0], moment=[0.0, 0.0, 0.5])
    f, m = disturbance_eval([d1, d2], hover_state(), 0.0)
    npt.assert_allclose(f, [1.0, 2.0, 0.0], atol=0)
    npt.assert_allclose(m, [0.0, 0.0, 0.5], atol=0)


def test_sense_specific_force_oracle():
    # The accelerometer reads body-frame specific force: R^T (a - g iz).
    rng = np.random.default_rng(55)
    dist = ConstantForce(force=[0.7, -0.4, 0.9])
    gvec = np.array([0.0, 0.0, PARAMS.gravity])
    for _ in range(200):
        st = random_state(rng)
        s = st.pack()
        sample = sense(st, PARAMS, model=dist, t=0.0)
        a_true = true_acceleration(s, (dist,), PARAMS, 0.0)
        expect = quat.rotmat(st.att).T @ (a_true - gvec)
        npt.assert_allclose(sample.accel_body, expect, rtol=0, atol=1e-12)


def test_sense_passthrough_channels():
    rng = np.random.default_rng(56)
    st = random_state(rng)
    sample = sense(st, PARAMS)
    npt.assert_allclose(sample.pos, st.pos, atol=0)
    npt.assert_allclose(sample.vel, st.vel, atol=0)
    npt.assert_allclose(sample.att, st.att, atol=0)
    npt.assert_allclose(sample.rates, st.rates, atol=0)
    npt.assert_allclose(sample.motor_speeds, st.motor_speeds, atol=0)
    # Outputs are copies, not views into the state.
    sample.pos[0] += 1.0
    assert st.pos[0] != sample.pos[0]


def test_sense_hover_reads_minus_g():
    sample = sense(hover_state(), PARAMS)
    npt.assert_allclose(sample.accel_body, [0.0, 0.0, -PARAMS.gravity],
                        rtol=1e-12)


def test_sense_noise_reproducible():
    noise = NoiseConfig(accel=0.1, gyro=0.01, motor=1.0, pos=0.003,
                        vel=0.02)
    st = hover_state()
    a = sense(st, PARAMS, noise=noise, rng=np.random.default_rng(9))
    b = sense(st, PARAMS, noise=noise, rng=np.random.default_rng(9))
    for name in ("accel_body", "rates", "motor_speeds", "pos", "vel"):
        npt.assert_allclose(getattr(a, name), getattr(b, name), atol=0)
    c = sense(st, PARAMS, noise=noise, rng=np.random.default_rng(10))
    assert not np.array_equal(a.pos, c.pos)
