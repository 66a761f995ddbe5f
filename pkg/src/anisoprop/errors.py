"""Exception types shared across the package."""


class CausticError(ValueError):
    """Raised when the requested time sits on (or too close to) a conjugate point.

    ``caustic_times`` lists nearby conjugate times when the caller computed them,
    so user-facing code can suggest safe alternatives.
    """

    def __init__(self, message, t=None, caustic_times=()):
        super().__init__(message)
        self.t = t
        self.caustic_times = tuple(caustic_times)


class DecoupledRegimeError(ValueError):
    """A quantity that only exists for a nonzero magnetic coupling was requested at omega0 = 0."""


class CalibrationError(RuntimeError):
    """A calibration fit was ambiguous or a calibration constant is not one of the allowed values."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""


class GridError(ValueError):
    """The sampling grid is too small or too coarse for the requested field."""
