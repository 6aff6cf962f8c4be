"""Exception types raised by the simulation stack."""


class VisualTrackingError(Exception):
    """Base class for every fault raised by this package."""


class RankDeficient(VisualTrackingError):
    """A matrix expected to have full row rank does not."""


class NonPositiveDepth(VisualTrackingError):
    """A feature point is at or behind the camera plane."""


class SingularZhat(VisualTrackingError):
    """The estimated depth matrix is not positive definite."""


class ConfigError(VisualTrackingError):
    """Malformed or invalid experiment configuration."""


class SimulationFault(VisualTrackingError):
    """Runtime fault inside the closed-loop integration.

    Carries the time and a snapshot of the last state so callers can dump it.
    """

    def __init__(self, message, t=None, state=None, cause=None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.cause = cause
