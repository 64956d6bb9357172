"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: resource-cap failures exit with 2,
everything user-facing else with 1.
"""

from __future__ import annotations


class CombilabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CombilabError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class ResourceLimitError(CombilabError):
    """An exact computation would exceed a configured enumeration cap."""

    def __init__(self, message: str, size: int | None = None, cap: int | None = None):
        super().__init__(message)
        self.size = size
        self.cap = cap


class UnsupportedRegimeError(DomainError):
    """Inputs fall outside the parameter regime a closed form is valid in."""


class MissingParameterError(DomainError):
    """A bound evaluator was not given a symbol it needs."""

    def __init__(self, symbol: str, kind: str | None = None):
        where = f" for bound kind {kind!r}" if kind else ""
        super().__init__(f"missing parameter {symbol!r}{where}")
        self.symbol = symbol


class ConvergenceError(CombilabError):
    """An iterative spectral routine failed to converge.

    ``bracket`` holds the best known (lower, upper) enclosure of the value.
    """

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class QuadratureError(CombilabError):
    """Adaptive quadrature could not reach the requested absolute error."""


class PostconditionError(CombilabError):
    """An operation's checked output guarantee failed; indicates a bug."""
