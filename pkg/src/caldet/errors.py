"""Exception hierarchy.

Input errors map to CLI exit code 2, numerical failures to exit code 3.
"""


class CaldetError(Exception):
    """Base class for all package errors."""


class InputError(CaldetError, ValueError):
    """Raised when an argument or scenario is invalid."""


class NumericError(CaldetError, ArithmeticError):
    """Raised when a computation cannot produce a trustworthy result."""


class SolveError(NumericError):
    """The resolvent does not exist: the spectral parameter hits an eigenvalue."""


class BasepointError(NumericError):
    """The basepoint operator ``P1 S(P2)`` is not invertible."""


class SpectralCutError(NumericError):
    """An eigenvalue lies too close to the chosen ray."""


class BranchError(NumericError):
    """The logarithm branch could not be followed along the ray."""


class FitError(NumericError):
    """An asymptotic fit is ill-conditioned.

    The ``diagnostics`` attribute carries the condition number and residual.
    """

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class IntegrationError(NumericError):
    """A contour or tail quadrature did not converge."""


class IncompleteSpectrumError(NumericError):
    """Root count disagrees with the argument-principle winding number."""


class ContinuationError(NumericError):
    """Richardson extrapolation of a continued zeta function failed."""


class TailError(NumericError):
    """The Weyl-law tail model does not fit the computed eigenvalues."""


class NonInvertibleError(NumericError):
    """The operator has a zero mode where invertibility is required."""


class GridHoleError(NumericError):
    """A parameter grid point is not invertible."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point
