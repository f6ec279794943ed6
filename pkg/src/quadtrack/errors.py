"""Error types raised by the simulator and controller.

Control-loop code catches ControlError subclasses and holds the previous
actuator command for the affected tick, so every failure mode the cascade
can hit has its own class here.
"""


class QuadtrackError(Exception):
    """Base class for all package errors."""


class ControlError(QuadtrackError):
    """Base class for recoverable per-tick controller failures."""


class YawSingular(ControlError):
    """Heading is undefined because the body x axis points straight up/down."""


class FreeFallSingular(ControlError):
    """Reference attitude undefined: commanded specific force is ~zero."""


class Singular(ControlError):
    """A feedforward system matrix is too ill-conditioned to invert."""


class DegenerateThrust(ControlError):
    """Commanded thrust vector is too small to define a direction."""


class NoConvergence(ControlError):
    """Iterative motor-speed inversion failed to converge."""


class BadCutoff(QuadtrackError):
    """Filter cutoff is not realizable at the given sample rate."""


class NonFinite(QuadtrackError):
    """A state or command became NaN/Inf."""


class Unstable(QuadtrackError):
    """A transfer function has a pole with nonnegative real part."""


class Diverged(QuadtrackError):
    """Simulated vehicle left the allowed envelope around the reference."""


class EmptyLog(QuadtrackError):
    """Metrics were requested on a log with no rows."""


class ScenarioError(QuadtrackError):
    """Scenario/config file failed validation.

    Carries the offending file and line number so the CLI can print a
    pointed diagnostic.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)
