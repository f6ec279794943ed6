"""Scenario configuration files.

Flat `key = value` text: one setting per line, `#` comments, blank lines
ignored. Units are spelled in the key names. Unknown keys, bad values,
and violated constraints are reported with the file name and line number
so they can be fixed like compiler errors.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (BodyDrag, ConstantForce, DragPlate, NoiseConfig,
                       WirePull)
from .control import ControlModes
from .errors import ScenarioError
from .trajectories import Hover, Roulette, Sampled, TanhAccel
from .vehicle import ControlGains, VehicleParams


def parse_kv(path):
    """Read `key = value` lines; returns {key: (lineno, raw_value)}."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read file: {e}", path=str(path)) from e
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError("expected 'key = value'", path=str(path),
                                line=lineno)
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key:
            raise ScenarioError("empty key", path=str(path), line=lineno)
        if key in out:
            raise ScenarioError(f"duplicate key '{key}' (first at line "
                                f"{out[key][0]})", path=str(path), line=lineno)
        out[key] = (lineno, raw)
    return out


class _KV:
    """Typed accessors over parsed key/value pairs with error locations."""

    def __init__(self, pairs, path):
        self.pairs = pairs
        self.path = str(path)
        self.used = set()

    def _raw(self, key):
        self.used.add(key)
        return self.pairs.get(key)

    def has(self, key):
        return key in self.pairs

    def error(self, key, msg):
        lineno = self.pairs[key][0] if key in self.pairs else None
        return ScenarioError(msg, path=self.path, line=lineno)

    def string(self, key, default=None):
        item = self._raw(key)
        return default if item is None else item[1]

    def number(self, key, default=None):
        item = self._raw(key)
        if item is None:
            return default
        try:
            value = float(item[1])
        except ValueError:
            raise self.error(key, f"'{key}' must be a number, got "
                             f"'{item[1]}'") from None
        if not math.isfinite(value):
            raise self.error(key, f"'{key}' must be finite")
        return value

    def integer(self, key, default=None):
        item = self._raw(key)
        if item is None:
            return default
        try:
            return int(item[1], 0)
        except ValueError:
            raise self.error(key, f"'{key}' must be an integer, got "
                             f"'{item[1]}'") from None

    def boolean(self, key, default=None):
        item = self._raw(key)
        if item is None:
            return default
        low = item[1].lower()
        if low in ("true", "on", "yes", "1"):
            return True
        if low in ("false", "off", "no", "0"):
            return False
        raise self.error(key, f"'{key}' must be true/false, got '{item[1]}'")

    def numbers(self, key, default=None, count=None):
        item = self._raw(key)
        if item is None:
            return default
        try:
            values = [float(v) for v in item[1].split(",")]
        except ValueError:
            raise self.error(key, f"'{key}' must be comma-separated numbers,"
                             f" got '{item[1]}'") from None
        if count is not None and len(values) != count:
            raise self.error(key, f"'{key}' needs {count} values, got "
                             f"{len(values)}")
        return np.array(values)

    def reject_unknown(self):
        unknown = set(self.pairs) - self.used
        if unknown:
            key = min(unknown, key=lambda k: self.pairs[k][0])
            raise self.error(key, f"unknown key '{key}'")


@dataclass
class Scenario:
    """Everything one closed-loop run needs, fully resolved."""

    name: str
    trajectory: object
    duration: float
    seed: int = 0
    params: VehicleParams = field(default_factory=VehicleParams)
    gains: ControlGains = field(default_factory=ControlGains)
    modes: ControlModes = field(default_factory=ControlModes)
    disturbance: object = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    battery_end_factor: float = 1.0
    cutoff_rad_s: float = 188.5

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("duration must be positive")
        if not 0.0 < self.battery_end_factor <= 1.2:
            raise ValueError("battery end factor out of range")
        if not self.modes.inertia_scale > 0.0:
            raise ValueError("delta must be positive")
        for name in ("accel", "gyro", "motor", "pos", "vel"):
            if getattr(self.noise, name) < 0.0:
                raise ValueError(f"noise {name} std must be >= 0")
        if not 0.0 < self.cutoff_rad_s:
            raise ValueError("filter cutoff must be positive")


def load_params(path):
    """Vehicle parameter overrides from a flat key-value file."""
    kv = _KV(parse_kv(path), path)
    base = VehicleParams()
    jd = [kv.number(f"inertia_{ax}_kgm2", base.inertia[i, i])
          for i, ax in enumerate(("xx", "yy", "zz"))]
    kwargs = dict(
        mass=kv.number("mass_kg", base.mass),
        gravity=kv.number("gravity_ms2", base.gravity),
        inertia=np.diag(jd),
        rotor_inertia=kv.number("rotor_inertia_kgm2", base.rotor_inertia),
        k_thrust=kv.number("k_thrust_n_per_rads2", base.k_thrust),
        k_yaw=kv.number("k_yaw_nm_per_rads2", base.k_yaw),
        arm_x=kv.number("arm_x_m", base.arm_x),
        arm_y=kv.number("arm_y_m", base.arm_y),
        motor_tau=kv.number("motor_tau_s", base.motor_tau),
        omega_min=kv.number("omega_min_rads", base.omega_min),
        omega_max=kv.number("omega_max_rads", base.omega_max),
    )
    kv.reject_unknown()
    try:
        return VehicleParams(**kwargs)
    except ValueError as e:
        raise ScenarioError(str(e), path=str(path)) from e


def load_gains(path):
    """Controller gain overrides from a flat key-value file."""
    kv = _KV(parse_kv(path), path)
    base = ControlGains()
    kwargs = dict(
        pos=kv.numbers("position_gains", base.pos, count=3),
        vel=kv.numbers("velocity_gains", base.vel, count=3),
        acc=kv.numbers("acceleration_gains", base.acc, count=3),
        att=kv.numbers("attitude_gains", base.att, count=3),
        rate=kv.numbers("rate_gains", base.rate, count=3),
        ki_motor=kv.number("motor_integral_gain", base.ki_motor),
    )
    kv.reject_unknown()
    try:
        return ControlGains(**kwargs)
    except ValueError as e:
        raise ScenarioError(str(e), path=str(path)) from e


def _build_trajectory(kv):
    kind = kv.string("trajectory")
    if kind is None:
        raise ScenarioError("missing required key 'trajectory'", path=kv.path)
    if kind == "hover":
        pos = (kv.number("hover_x_m", 0.0), kv.number("hover_y_m", 0.0),
               kv.number("hover_z_m", -1.5))
        return Hover(pos, kv.number("hover_yaw_rad", 0.0))
    if kind == "roulette":
        r = [kv.number(f"roulette_r{i}_m", d) for i, d in
             enumerate((6.0, 1.8, 0.6, 2.25, -0.3, -0.45), start=1)]
        k = [kv.number(f"roulette_k{i}_rads", d) for i, d in
             enumerate((0.28, 2.8, 1.4), start=1)]
        try:
            return Roulette(r, k, z=kv.number("roulette_z_m", -1.5),
                            yaw=kv.number("roulette_yaw_rad", 0.0))
        except ValueError as e:
            raise kv.error("trajectory", str(e)) from e
    if kind == "tanh_accel":
        return TanhAccel(z=kv.number("tanh_z_m", -1.5),
                         yaw=kv.number("tanh_yaw_rad", 0.0))
    if kind == "sampled":
        path = kv.string("sampled_file")
        if path is None:
            raise ScenarioError("trajectory 'sampled' needs sampled_file",
                                path=kv.path)
        resolved = Path(kv.path).parent / path
        return Sampled.from_csv(resolved)
    raise kv.error("trajectory", f"unknown trajectory '{kind}' (expected "
                   "hover, roulette, tanh_accel, or sampled)")


_PLATE_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0),
               "z": (0.0, 0.0, 1.0)}


def _build_disturbance(kv):
    kind = kv.string("disturbance", "none")
    try:
        if kind == "none":
            return None
        if kind == "constant_force":
            return ConstantForce(
                force=(kv.number("force_x_n", 0.0),
                       kv.number("force_y_n", 0.0),
                       kv.number("force_z_n", 0.0)),
                moment=(kv.number("moment_x_nm", 0.0),
                        kv.number("moment_y_nm", 0.0),
                        kv.number("moment_z_nm", 0.0)),
                t_on=kv.number("force_on_s", 0.0),
                t_off=kv.number("force_off_s", math.inf))
        if kind == "wire_pull":
            times = kv.numbers("wire_times_s")
            if times is None:
                raise ValueError("wire_pull needs wire_times_s")
            n = len(times)
            zeros = np.zeros(n)
            forces = np.column_stack([
                kv.numbers("wire_fx_n", zeros, count=n),
                kv.numbers("wire_fy_n", zeros, count=n),
                kv.numbers("wire_fz_n", zeros, count=n)])
            return WirePull(times, forces)
        if kind == "drag_plate":
            normal_key = kv.string("plate_normal", "x")
            normal = _PLATE_AXES.get(normal_key)
            if normal is None:
                normal = [float(v) for v in normal_key.split(",")]
            return DragPlate(area=kv.number("plate_area_m2", 0.0512),
                             cd=kv.number("plate_cd", 1.2),
                             normal=normal,
                             arm=kv.numbers("plate_arm_m", np.zeros(3),
                                            count=3))
        if kind == "body_drag":
            return BodyDrag(c_lin=kv.number("drag_lin_n_per_ms", 0.0),
                            c_quad=kv.number("drag_quad_n_per_ms2", 0.0))
    except ValueError as e:
        raise kv.error("disturbance", str(e)) from e
    raise kv.error("disturbance", f"unknown disturbance '{kind}' (expected "
                   "none, constant_force, wire_pull, drag_plate, body_drag)")


def load_scenario(path, seed_override=None):
    """Build a Scenario from a config file; ScenarioError on any problem."""
    path = Path(path)
    kv = _KV(parse_kv(path), path)

    trajectory = _build_trajectory(kv)
    disturbance = _build_disturbance(kv)

    params_file = kv.string("params_file")
    params = load_params(path.parent / params_file) if params_file \
        else VehicleParams()
    gains_file = kv.string("gains_file")
    gains = load_gains(path.parent / gains_file) if gains_file \
        else ControlGains()

    modes = ControlModes(
        feedforward=kv.boolean("feedforward", True),
        ff_from_state=kv.boolean("ff_from_state", False),
        non_incremental=kv.boolean("non_incremental", False),
        linearized_allocation=kv.boolean("linearized_allocation", False),
        inertia_scale=kv.number("delta", 1.0))

    noise = NoiseConfig(
        accel=kv.number("noise_accel_std_ms2", 0.0),
        gyro=kv.number("noise_gyro_std_rads", 0.0),
        motor=kv.number("noise_motor_std_rads", 0.0),
        pos=kv.number("noise_pos_std_m", 0.0),
        vel=kv.number("noise_vel_std_ms", 0.0))

    duration = kv.number("duration_s")
    if duration is None:
        raise ScenarioError("missing required key 'duration_s'",
                            path=str(path))
    seed = kv.integer("seed", 0)
    if seed_override is not None:
        seed = seed_override
    battery = kv.number("battery_end_factor", 1.0)
    cutoff = kv.number("cutoff_rads", 188.5)
    kv.reject_unknown()

    try:
        return Scenario(name=path.stem, trajectory=trajectory,
                        duration=duration, seed=seed, params=params,
                        gains=gains, modes=modes, disturbance=disturbance,
                        noise=noise, battery_end_factor=battery,
                        cutoff_rad_s=cutoff)
    except ValueError as e:
        raise ScenarioError(str(e), path=str(path)) from e
