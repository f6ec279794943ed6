"""Deterministic quadrotor simulator and trajectory-tracking controller.

NED frames throughout: +z points down, gravity is +9.81 on the inertial
z-axis, and the thrust scalar is negative (it pulls along -body-z).
"""

from .vehicle import ControlGains, GRAVITY, VehicleParams, VehicleState
from .dynamics import (BodyDrag, ConstantForce, DragPlate, NoiseConfig,
                       SensorSample, WirePull)
from .filters import Biquad, FilterBank, FilteredSignals
from .flatness import Feedforward, ReferenceSample, feedforward
from .control import Controller, ControlModes, LoopOutputs, MotorMap
from .allocation import allocate, allocate_linearized, feasible_yaw_moment
from .analysis import RationalTF, build_linear_loop, step_response
from .trajectories import Hover, Roulette, Sampled, TanhAccel
from .scenario import Scenario, load_scenario
from .sim import MetricsReport, SimLog, metrics, run_scenario, write_csv
from . import errors

__version__ = "0.1.0"

__all__ = [
    "Biquad", "BodyDrag", "ConstantForce", "Controller", "ControlGains",
    "ControlModes", "DragPlate", "Feedforward", "FilterBank",
    "FilteredSignals", "GRAVITY", "Hover", "LoopOutputs", "MetricsReport",
    "MotorMap", "NoiseConfig", "RationalTF", "ReferenceSample", "Roulette",
    "Sampled", "Scenario", "SensorSample", "SimLog", "TanhAccel",
    "VehicleParams", "VehicleState", "WirePull", "allocate",
    "allocate_linearized", "build_linear_loop", "errors",
    "feasible_yaw_moment", "feedforward", "load_scenario", "metrics",
    "run_scenario", "step_response", "write_csv",
]
