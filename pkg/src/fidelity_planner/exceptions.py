"""Exception hierarchy shared by all modules."""


class FidelityPlannerError(Exception):
    """Base class for every error raised by this package."""


class LatticeTruncationError(FidelityPlannerError):
    """A lattice alias sum did not converge within the allowed radius.

    Attributes
    ----------
    partial_sum : float or ndarray
        The last partial sum (including tail estimate) that was computed.
    radius : int
        Lattice radius at which the expansion was abandoned.
    """

    def __init__(self, message, partial_sum, radius):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.radius = radius


class QuadratureError(FidelityPlannerError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, value, achieved_tolerance):
        super().__init__(message)
        self.value = value
        self.achieved_tolerance = achieved_tolerance


class UnsupportedDimensionError(FidelityPlannerError, ValueError):
    """Requested input dimension is not supported by the quadrature path."""


class InsufficientDataError(FidelityPlannerError, ValueError):
    """Not enough observations to carry out the requested fit."""


class ConditioningError(FidelityPlannerError, ArithmeticError):
    """Gram matrix could not be factorized even after nugget escalation."""


class NestednessError(FidelityPlannerError, ValueError):
    """High-fidelity design is not contained in the low-fidelity design."""


class InfeasiblePlanError(FidelityPlannerError, ValueError):
    """The budget cannot buy even a single low-fidelity evaluation."""
