"""Exception types raised across the package."""


class GmndsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GmndsError, ValueError):
    """Malformed arguments: wrong shapes, bad weights, out-of-range values."""


class DegenerateCovarianceError(InvalidInputError):
    """A covariance matrix failed the positive-definite factorization."""


class MethodInapplicableError(GmndsError):
    """The requested numerical method cannot handle these parameters."""


class NumericalFailure(GmndsError, ArithmeticError):
    """An iterative numerical routine did not reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    estimate : float, optional
        Achieved error estimate (or other diagnostic) at the point of failure.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class MeasurementInconsistentError(NumericalFailure):
    """Every mixture component assigned zero likelihood to a measurement."""


class SpacingNotFoundError(GmndsError):
    """No lag spacing satisfies the autocorrelation threshold."""


class UndefinedAutocorrelationError(InvalidInputError):
    """Autocorrelation requested for a constant series."""
