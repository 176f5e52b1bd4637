"""Exception hierarchy shared by all corneropt modules."""


class CornerOptError(Exception):
    """Base class for all errors raised by corneropt."""


class DomainError(CornerOptError):
    """A chart, retraction or linearizing map was evaluated outside its domain."""


class ChartMismatchError(CornerOptError):
    """A tangent representative was supplied in the wrong chart."""


class NotInSetError(CornerOptError):
    """A query point does not belong to the corner set."""


class ValidationFailureError(CornerOptError):
    """A corner-set description violates one of its structural conditions.

    The message names the violated condition (surjectivity, index bound,
    membership consistency).
    """


class DimensionMismatchError(CornerOptError):
    """Vector or matrix dimensions are inconsistent with the cone."""


class IndexOutOfRangeError(CornerOptError):
    """A face index does not refer to an inequality row."""


class DimensionTooLargeError(CornerOptError):
    """An enumeration-based routine was called beyond its supported dimension."""


class InfeasiblePointError(CornerOptError):
    """The constraint value g(p) lies outside the corner set."""


class NoMultiplierError(CornerOptError):
    """No Lagrange multiplier exists at the requested tolerance.

    Carries the best attainable stationarity residual so callers can report
    how far the point is from being a KKT point.
    """

    def __init__(self, message, residual=None, best_multiplier=None):
        super().__init__(message)
        self.residual = residual
        self.best_multiplier = best_multiplier


class InvalidCertificateError(CornerOptError):
    """A KKT certificate does not certify the point it was supplied for."""


class NotStationaryError(CornerOptError):
    """Second derivatives were requested at a non-stationary point."""


class ModelMismatchError(CornerOptError):
    """An operation requires a model structure the instance does not have."""


class BadParamsError(CornerOptError):
    """Model parameters are inconsistent or degenerate."""


class QPInfeasibleError(CornerOptError):
    """The linearized subproblem has no feasible point."""


class LineSearchFailureError(CornerOptError):
    """Backtracking exhausted its halvings without an acceptable step."""


class BreakdownError(CornerOptError):
    """The solver cannot continue (restoration failed or domain exhausted)."""


class ConfigError(CornerOptError):
    """A run configuration is malformed or references unknown entities."""
