"""Closed-loop scenario execution, logging, metrics, and CSV I/O.

Physics integrates at 8 kHz (four RK4 substeps per control tick), the
controller runs at 2 kHz on sensors sampled the same tick, and one log
row is written per tick. Runs are bit-deterministic for a fixed seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, flatness, quat
from .control import Controller, MotorMap
from .errors import (ControlError, Diverged, EmptyLog, FreeFallSingular,
                     ScenarioError)
from .vehicle import VehicleState

CONTROL_HZ = 2000.0
PHYSICS_SUBSTEPS = 4
DIVERGENCE_LIMIT_M = 100.0

CSV_COLUMNS = ("t", "x", "y", "z", "xr", "yr", "zr", "vx", "vy", "vz",
               "qw", "qx", "qy", "qz", "wx", "wy", "wz",
               "w1", "w2", "w3", "w4", "z1", "z2", "z3", "z4",
               "acx", "acy", "acz", "mcx", "mcy", "mcz",
               "fex", "fey", "fez", "fhx", "fhy", "fhz")


@dataclass
class SimLog:
    """Per-tick time series of one run. Arrays are [n_ticks, dim]."""

    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    att: np.ndarray
    rates: np.ndarray
    motors: np.ndarray
    ref_pos: np.ndarray
    ref_vel: np.ndarray
    ref_yaw: np.ndarray
    acc_cmd: np.ndarray
    moment_cmd: np.ndarray
    throttle: np.ndarray
    force_applied: np.ndarray
    force_est: np.ndarray
    accel_true: np.ndarray
    faults: int = 0
    diverged: bool = False
    name: str = ""

    def __len__(self):
        return len(self.t)

    def truncated(self, n):
        kw = {}
        for key in ("t", "pos", "vel", "att", "rates", "motors", "ref_pos",
                    "ref_vel", "ref_yaw", "acc_cmd", "moment_cmd", "throttle",
                    "force_applied", "force_est", "accel_true"):
            kw[key] = getattr(self, key)[:n]
        return SimLog(**kw, faults=self.faults, diverged=self.diverged,
                      name=self.name)


def initial_state(scenario):
    """State on the reference at t = 0: no startup transient to fight."""
    ref = scenario.trajectory.sample(0.0)
    par = scenario.params
    try:
        rot, tau = flatness.reference_attitude(ref.acc, ref.yaw, par.gravity)
        att = quat.from_rotmat(rot)
        ff = flatness.feedforward(ref, par.gravity)
        rates = ff.rates
    except ControlError:
        att = quat.IDENTITY.copy()
        rates = np.zeros(3)
        tau = -par.gravity
    w = math.sqrt(par.mass * abs(tau) / (4.0 * par.k_thrust))
    w = min(max(w, par.omega_min), par.omega_max)
    return VehicleState(pos=ref.pos.copy(), vel=ref.vel.copy(), att=att,
                        rates=rates.copy(), motor_speeds=np.full(4, w))


def run_scenario(scenario):
    """Run one scenario to completion; returns a SimLog.

    Raises Diverged (with the partial log attached as .log) if position
    error exceeds the divergence limit.
    """
    par = scenario.params
    dt_c = 1.0 / CONTROL_HZ
    dt_p = dt_c / PHYSICS_SUBSTEPS
    n = int(round(scenario.duration * CONTROL_HZ))
    if n < 1:
        raise ScenarioError("duration shorter than one control tick")

    rng = np.random.default_rng(scenario.seed)
    noise = scenario.noise if scenario.noise.any() else None
    motor_map = MotorMap.from_params(par)
    ctl = Controller(par, scenario.gains, scenario.modes, motor_map,
                     scenario.cutoff_rad_s, CONTROL_HZ)
    state = initial_state(scenario)
    model = scenario.disturbance
    if model is None:
        models = ()
    elif isinstance(model, (list, tuple)):
        models = tuple(model)
    else:
        models = (model,)
    battery_slope = (scenario.battery_end_factor - 1.0) / scenario.duration

    log = SimLog(
        t=np.empty(n), pos=np.empty((n, 3)), vel=np.empty((n, 3)),
        att=np.empty((n, 4)), rates=np.empty((n, 3)),
        motors=np.empty((n, 4)), ref_pos=np.empty((n, 3)),
        ref_vel=np.empty((n, 3)), ref_yaw=np.empty(n),
        acc_cmd=np.empty((n, 3)), moment_cmd=np.empty((n, 3)),
        throttle=np.empty((n, 4)), force_applied=np.empty((n, 3)),
        force_est=np.empty((n, 3)), accel_true=np.empty((n, 3)),
        name=scenario.name)

    for k in range(n):
        t = k * dt_c
        ref = scenario.trajectory.sample(t)
        sample = dynamics.sense(state, par, model, t, noise, rng)
        throttle, out = ctl.tick(sample, ref)
        if out.fault:
            log.faults += 1

        packed = state.pack()
        f_ext, _ = dynamics.disturbance_eval(model, packed, t)
        log.t[k] = t
        log.pos[k] = state.pos
        log.vel[k] = state.vel
        log.att[k] = state.att
        log.rates[k] = state.rates
        log.motors[k] = state.motor_speeds
        log.ref_pos[k] = ref.pos
        log.ref_vel[k] = ref.vel
        log.ref_yaw[k] = ref.yaw
        log.acc_cmd[k] = out.acc_cmd
        log.moment_cmd[k] = out.moment_cmd
        log.throttle[k] = throttle
        log.force_applied[k] = f_ext
        log.force_est[k] = out.force_est
        log.accel_true[k] = dynamics.true_acceleration(packed, models, par, t)

        err = state.pos - ref.pos
        if math.sqrt(err[0] ** 2 + err[1] ** 2 + err[2] ** 2) \
                > DIVERGENCE_LIMIT_M:
            partial = log.truncated(k + 1)
            partial.diverged = True
            exc = Diverged(f"position error exceeded "
                           f"{DIVERGENCE_LIMIT_M:.0f} m at t={t:.3f} s")
            exc.log = partial
            raise exc

        battery = 1.0 + battery_slope * t
        state = dynamics.step(state, throttle, model, par, dt_p,
                              motor_map.inverse, t, battery,
                              PHYSICS_SUBSTEPS)
    return log


def _wrap_pi(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def yaw_series(att):
    """Per-tick yaw angles; holds the previous value across singular ticks."""
    n = len(att)
    out = np.empty(n)
    prev = 0.0
    for k in range(n):
        q0, q1, q2, q3 = att[k]
        bx = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
        by = 2.0 * (q1 * q2 + q0 * q3)
        if math.hypot(bx, by) > 1e-9:
            prev = math.atan2(by, bx)
        out[k] = prev
    return out


@dataclass
class MetricsReport:
    """Tracking metrics over one log, RMS/max pairs per quantity."""

    rms_pos: float
    max_pos: float
    rms_yaw: float
    max_yaw: float
    rms_vel: float
    max_vel: float
    rms_sf: float
    max_sf: float
    f_est_mean: float
    f_est_max: float
    ticks: int
    faults: int = 0

    def lines(self):
        return [
            f"rms_pos_m {self.rms_pos:.9g}",
            f"max_pos_m {self.max_pos:.9g}",
            f"rms_yaw_rad {self.rms_yaw:.9g}",
            f"max_yaw_rad {self.max_yaw:.9g}",
            f"rms_vel_ms {self.rms_vel:.9g}",
            f"max_vel_ms {self.max_vel:.9g}",
            f"rms_specific_force_ms2 {self.rms_sf:.9g}",
            f"max_specific_force_ms2 {self.max_sf:.9g}",
            f"f_est_mean_n {self.f_est_mean:.9g}",
            f"f_est_max_n {self.f_est_max:.9g}",
            f"ticks {self.ticks}",
            f"faults {self.faults}",
        ]


def _rms_max(mag):
    return float(np.sqrt(np.mean(mag * mag))), float(np.max(mag))


def metrics(log, gravity=9.81):
    """MetricsReport from an in-memory log."""
    if len(log) == 0:
        raise EmptyLog("log has no ticks")
    pos_err = np.linalg.norm(log.pos - log.ref_pos, axis=1)
    yaw_err = np.abs(_wrap_pi(yaw_series(log.att) - log.ref_yaw))
    vel = np.linalg.norm(log.vel, axis=1)
    sf = log.accel_true.copy()
    sf[:, 2] -= gravity
    sf = np.linalg.norm(sf, axis=1)
    f_est = np.linalg.norm(np.nan_to_num(log.force_est), axis=1)
    rp, mp = _rms_max(pos_err)
    ry, my = _rms_max(yaw_err)
    rv, mv = _rms_max(vel)
    rs, ms = _rms_max(sf)
    return MetricsReport(rms_pos=rp, max_pos=mp, rms_yaw=ry, max_yaw=my,
                         rms_vel=rv, max_vel=mv, rms_sf=rs, max_sf=ms,
                         f_est_mean=float(np.mean(f_est)),
                         f_est_max=float(np.max(f_est)),
                         ticks=len(log), faults=log.faults)


def write_csv(log, path):
    """Write the fixed-schema log CSV (9 significant digits)."""
    cols = [log.t,
            log.pos[:, 0], log.pos[:, 1], log.pos[:, 2],
            log.ref_pos[:, 0], log.ref_pos[:, 1], log.ref_pos[:, 2],
            log.vel[:, 0], log.vel[:, 1], log.vel[:, 2],
            log.att[:, 0], log.att[:, 1], log.att[:, 2], log.att[:, 3],
            log.rates[:, 0], log.rates[:, 1], log.rates[:, 2],
            log.motors[:, 0], log.motors[:, 1], log.motors[:, 2],
            log.motors[:, 3],
            log.throttle[:, 0], log.throttle[:, 1], log.throttle[:, 2],
            log.throttle[:, 3],
            log.acc_cmd[:, 0], log.acc_cmd[:, 1], log.acc_cmd[:, 2],
            log.moment_cmd[:, 0], log.moment_cmd[:, 1], log.moment_cmd[:, 2],
            log.force_applied[:, 0], log.force_applied[:, 1],
            log.force_applied[:, 2],
            log.force_est[:, 0], log.force_est[:, 1], log.force_est[:, 2]]
    data = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def read_csv(path):
    """Load a log CSV back into named arrays; validates the header."""
    with open(path) as fh:
        header = fh.readline().strip()
    if header.split(",") != list(CSV_COLUMNS):
        raise ScenarioError("unrecognized log header (expected the "
                            "fixed simulator schema)", path=str(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(CSV_COLUMNS):
        raise ScenarioError("column count does not match header",
                            path=str(path))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


def metrics_from_csv(cols, gravity=9.81):
    """Recompute metrics from a log CSV.

    Position, velocity, and force-estimate rows are exact recomputations.
    The yaw reference is not logged, so yaw error is taken against zero
    (true for every built-in trajectory). Acceleration is reconstructed
    by central differences of the logged velocity.
    """
    n = len(cols["t"])
    if n == 0:
        raise EmptyLog("log has no rows")
    pos_err = np.sqrt((cols["x"] - cols["xr"]) ** 2
                      + (cols["y"] - cols["yr"]) ** 2
                      + (cols["z"] - cols["zr"]) ** 2)
    att = np.column_stack([cols["qw"], cols["qx"], cols["qy"], cols["qz"]])
    yaw_err = np.abs(_wrap_pi(yaw_series(att)))
    vel = np.sqrt(cols["vx"] ** 2 + cols["vy"] ** 2 + cols["vz"] ** 2)
    if n >= 3:
        acc = np.column_stack([np.gradient(cols["v" + ax], cols["t"])
                               for ax in "xyz"])
    else:
        acc = np.zeros((n, 3))
    acc[:, 2] -= gravity
    sf = np.linalg.norm(acc, axis=1)
    f_est = np.sqrt(np.nan_to_num(cols["fhx"]) ** 2
                    + np.nan_to_num(cols["fhy"]) ** 2
                    + np.nan_to_num(cols["fhz"]) ** 2)
    rp, mp = _rms_max(pos_err)
    ry, my = _rms_max(yaw_err)
    rv, mv = _rms_max(vel)
    rs, ms = _rms_max(sf)
    return MetricsReport(rms_pos=rp, max_pos=mp, rms_yaw=ry, max_yaw=my,
                         rms_vel=rv, max_vel=mv, rms_sf=rs, max_sf=ms,
                         f_est_mean=float(np.mean(f_est)),
                         f_est_max=float(np.max(f_est)),
                         ticks=n)
