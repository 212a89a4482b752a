"""Exception hierarchy shared by all modules."""


class MomentSplatError(Exception):
    """Base class for every error raised by the package."""


class InvalidPrimitiveError(MomentSplatError, ValueError):
    """A Gaussian primitive has degenerate or invalid parameters."""


class ConfigError(MomentSplatError, ValueError):
    """A configuration value violates its invariants."""


class NumericOverflowError(MomentSplatError, ArithmeticError):
    """A moment recurrence produced a non-finite value."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DegenerateMomentError(MomentSplatError, ArithmeticError):
    """Moment matrix stayed indefinite after the maximum bias."""


class SchemaError(MomentSplatError, ValueError):
    """Scene file does not follow the expected schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ProxyDegenerateError(MomentSplatError, ArithmeticError):
    """The screen-space conic is not a proper ellipse."""


class UsageError(MomentSplatError, ValueError):
    """An operation was called with inconsistent arguments."""
