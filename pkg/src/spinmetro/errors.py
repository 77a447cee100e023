"""Exception types raised across the package."""


class SpinMetroError(Exception):
    """Base class for all package errors."""


class InvalidDirection(SpinMetroError, ValueError):
    pass


class ReprMismatch(SpinMetroError, ValueError):
    pass


class CapacityExceeded(SpinMetroError, ValueError):
    pass


class NonSymmetricState(SpinMetroError, ValueError):
    pass


class InvalidCoupling(SpinMetroError, ValueError):
    pass


class MissingDirection(SpinMetroError, KeyError):
    pass


class InvalidConfusion(SpinMetroError, ValueError):
    pass


class SingularConfusion(SpinMetroError, ValueError):
    pass


class InsufficientShots(SpinMetroError, ValueError):
    pass


class SingularCovariance(SpinMetroError, ArithmeticError):
    """Covariance matrix cannot be regularised (zero trace or non-finite entries)."""


class LengthMismatch(SpinMetroError, ValueError):
    pass


class ZeroTheta(SpinMetroError, ValueError):
    pass


class DegenerateFit(SpinMetroError, ArithmeticError):
    pass


class ConfigError(SpinMetroError, ValueError):
    """Invalid experiment configuration; message carries the offending path."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")
