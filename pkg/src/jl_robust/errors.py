"""Exception hierarchy of the package.

Every error derives from [JLRobustError][jl_robust.errors.JLRobustError] and from the
builtin exception it naturally specializes, so callers may catch either.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from jl_robust.hull import SparseSolution


class JLRobustError(Exception):
    """Base class of all package errors."""


class DimensionMismatchError(JLRobustError, ValueError):
    """Operands live in spaces of different dimension."""


class InvalidPointSetError(JLRobustError, ValueError):
    """A point set is empty, badly shaped or holds non-finite coordinates."""


class InvalidCombinationError(JLRobustError, ValueError):
    """Convex-combination weights or indices violate their invariants."""


class OracleScaleError(JLRobustError, ValueError):
    """An exact oracle was asked to run beyond desk scale."""


class TriangleWitnessError(JLRobustError, ValueError):
    """A triangle witness does not satisfy the perturbation preconditions."""


class ZeroPolytopeDistanceError(JLRobustError, ArithmeticError):
    """The origin lies in the hull, so no positive distance or direction exists."""


class ConvergenceError(JLRobustError, RuntimeError):
    """An iterative solver ran out of iterations.

    Attributes:
        best: The best solution reached before the budget ran out.
    """

    def __init__(self, msg: str, best: SparseSolution | None = None) -> None:
        super().__init__(msg)
        self.best = best


class NonSeparableError(JLRobustError, RuntimeError):
    """The selected inliers cannot be separated (polytope distance is zero).

    Attributes:
        diagnostics: Free-form details about the failed pipeline stage.
    """

    def __init__(self, msg: str, diagnostics: dict[str, Any] | None = None) -> None:
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class CoverageError(JLRobustError, RuntimeError):
    """A clustering black box covered the wrong number of points."""


class DatasetParseError(JLRobustError, ValueError):
    """A dataset file is malformed.

    Attributes:
        line: 1-based line number of the offending row.
        column: 1-based column (CSV) or token position (sparse text), if known.
    """

    def __init__(self, msg: str, line: int | None = None, column: int | None = None) -> None:
        super().__init__(msg)
        self.line = line
        self.column = column


class ConfigValidationError(JLRobustError, ValueError):
    """An experiment configuration is invalid.

    Attributes:
        fields: Names of every offending configuration field.
    """

    def __init__(self, msg: str, fields: list[str] | None = None) -> None:
        super().__init__(msg)
        self.fields = fields or []


PIPELINE_ERRORS = (
    NonSeparableError,
    ConvergenceError,
    CoverageError,
    ZeroPolytopeDistanceError,
)
