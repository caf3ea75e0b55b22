"""Exception hierarchy shared by all solvers."""


class RelNewtError(Exception):
    """Base class for every error raised by :mod:`relnewt`."""


class ValidationError(RelNewtError, ValueError):
    """Inputs violate a documented precondition."""


class SolverError(RelNewtError):
    """A numerical procedure failed to produce a result."""


class ZeroDirection(ValidationError):
    pass


class BelowShell(ValidationError):
    """Energy does not exceed ``c**2 + V(x)`` at the queried point."""


class GridMismatch(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValidationError):
    pass


class StepFailure(SolverError):
    pass


class EventNotFound(SolverError):
    pass


class TrappedOrbit(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class NonUnique(SolverError):
    """Two distinct shooting directions reach the same boundary point."""


class NoChord(SolverError):
    pass


class LeftDomain(SolverError):
    pass


class ThresholdNotFound(SolverError):
    pass


class NotConverged(SolverError):
    pass
