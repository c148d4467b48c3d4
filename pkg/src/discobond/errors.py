"""Exception hierarchy."""


class DiscobondError(Exception):
    """Base class for all package errors."""


class UnsupportedCorrelation(DiscobondError, ValueError):
    """Correlation outside every range with a proven stable stencil (|rho| >= 1/2)."""


class WrongScheme(DiscobondError, ValueError):
    """A stability check was requested for a correlation its scheme does not cover."""


class StabilityViolation(DiscobondError):
    """Stepping was requested on a grid whose stability verdict is not PASS."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonFiniteValue(DiscobondError, ArithmeticError):
    pass


class OutOfDomain(DiscobondError, ValueError):
    pass


class AmbiguousTime(DiscobondError, ValueError):
    """Query at a coupon date without saying which side of the payment is wanted."""


class NoFeasibleDt(DiscobondError):
    pass


class NonPositivePrice(DiscobondError, ValueError):
    pass


class QuadratureError(DiscobondError, ArithmeticError):
    """Composite Simpson failed to settle within the panel budget."""


class ConfigError(DiscobondError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
