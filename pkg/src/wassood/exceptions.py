"""Exception and warning classes raised across the package."""


class InsufficientDataError(ValueError):
    """Too few observations for the requested estimate."""


class DimensionMismatchError(ValueError):
    """Array shapes are incompatible with a fitted model or with each other."""


class SingularCovarianceError(ValueError):
    """A covariance matrix that must be inverted is (numerically) singular."""

    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = float(eigenvalue)
        if message is None:
            message = f"covariance is singular: smallest eigenvalue {self.eigenvalue:.3e}"
        super().__init__(message)


class ConditionViolatedError(ValueError):
    """A bound was evaluated outside the regime where it applies."""


class InfeasibleMarginalsError(ValueError):
    """Transport marginals are not probability vectors of equal mass."""


class InputFormatError(ValueError):
    """A CSV or JSON input file could not be parsed."""


class AbsoluteContinuityWarning(RuntimeWarning):
    """A divergence was infinite because P is not absolutely continuous w.r.t. Q."""


class NumericalClampWarning(RuntimeWarning):
    """Negative eigenvalues of noticeable magnitude were clamped to zero."""
