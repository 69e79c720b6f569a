"""Exception types shared across the package."""


class FracOUError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(FracOUError, ValueError):
    """A parameter lies outside the domain an operation accepts."""


class NumericAccuracyError(FracOUError, ArithmeticError):
    """A numerical procedure could not reach its tolerance.

    ``achieved`` carries the best error bound that was reached, if known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NotPositiveDefiniteError(NumericAccuracyError):
    """A covariance matrix is materially indefinite."""


class DegeneratePathError(FracOUError, ArithmeticError):
    """An observation vector has zero mean square."""


class ConfigError(FracOUError, ValueError):
    """Malformed or incomplete run configuration."""
