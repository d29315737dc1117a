"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to: 2 for problems
with the user's input, 3 for internal numerical inconsistencies.
"""

from __future__ import annotations


class ProdformError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ContractViolation(ProdformError, ValueError):
    """An argument does not satisfy the documented precondition."""

    exit_code = 2


class DomainError(ProdformError, ValueError):
    """A point lies outside the domain of an operation (e.g. off the quadric)."""

    exit_code = 2


class UnsupportedError(ProdformError):
    """The operation is not defined for the given curvature configuration."""

    exit_code = 2


class ImmersionDegenerate(ProdformError):
    """The Jacobian of the chart map lost rank."""

    exit_code = 2


class GeometryInconsistency(ProdformError):
    """A structural identity that must hold exactly failed numerically."""

    exit_code = 3


class InputContractError(ProdformError, ValueError):
    """User supplied data (a normal field, an inclusion) breaks its contract."""

    exit_code = 2


class NotIsometric(ProdformError, ValueError):
    """Two immersions that must induce the same metric do not."""

    exit_code = 2


class InconsistencyError(ProdformError):
    """Measured invariants contradict a classification dichotomy."""

    exit_code = 3


class ScenarioError(ProdformError):
    """Problems with a scenario file."""

    exit_code = 2


class ParseError(ScenarioError):
    """Syntax error in a scenario file or an inline expression."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 field: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.field = field
        where = []
        if field:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(ScenarioError):
    """A scenario parsed but its content is inconsistent."""
