"""Exception hierarchy shared by all modules."""


class LpDvoretzkyError(Exception):
    """Base class for library errors."""


class InvalidDimensionError(LpDvoretzkyError, ValueError):
    pass


class ShapeError(LpDvoretzkyError, ValueError):
    pass


class UnsupportedExponentError(LpDvoretzkyError, ValueError):
    pass


class DomainError(LpDvoretzkyError, ValueError):
    pass


class ScaleError(LpDvoretzkyError, ValueError):
    """Requested computation exceeds the desk-scale guard."""


class MeasureValidationError(LpDvoretzkyError, ValueError):
    pass


class RankError(LpDvoretzkyError, ValueError):
    pass


class ConvergenceError(LpDvoretzkyError, RuntimeError):
    """Fixed-point solver did not converge; ``trace`` holds the residual history."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class PrecisionError(LpDvoretzkyError, RuntimeError):
    """A Monte Carlo estimate is too noisy for the requested tolerance."""


class UnsupportedRegimeError(LpDvoretzkyError, ValueError):
    pass


class ConfigError(LpDvoretzkyError, ValueError):
    pass


class ParseError(LpDvoretzkyError, ValueError):
    """Malformed input or result file; the message names the offending line."""
