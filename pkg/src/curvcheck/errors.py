"""Exception types shared across the package."""


class CurvcheckError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(CurvcheckError, ValueError):
    """An argument is structurally wrong (bad slot, bad id, bad range)."""


class DimensionMismatchError(InvalidArgumentError):
    """Operands live in different dimensions or at different base points."""


class DomainError(CurvcheckError):
    """A point lies outside (or too close to the boundary of) a field domain."""


class EvaluationError(CurvcheckError):
    """An expression is not evaluable or not differentiable at the point."""


class ParseError(CurvcheckError):
    """Expression text failed to parse; carries line/column information."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class OrderError(CurvcheckError):
    """Requested derivatives exceed the available jet order."""


class DegenerateMetricError(CurvcheckError):
    """The metric is singular or not positive definite at a point."""


class CriticalPointError(CurvcheckError):
    """Operation requires the potential gradient bounded away from zero."""


class QuadratureError(CurvcheckError):
    """Chart integration failed to converge (non-integrable decay)."""


class ScenarioError(CurvcheckError):
    """A scenario file is malformed or references unknown ids."""
