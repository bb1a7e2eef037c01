"""Exception hierarchy shared by all gaussot modules."""


class GaussotError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GaussotError, ValueError):
    """Bad input: wrong shape, not positive-definite, out-of-domain value."""


class AssumptionError(GaussotError):
    """The solvability assumption failed: the tilt matrix is singular."""


class NumericalError(GaussotError):
    """A numerical routine broke down (non-convergence, indefinite root)."""


class ConvergenceError(NumericalError):
    """Iterative method hit its cap.  Carries the last residual seen."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
