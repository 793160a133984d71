"""Exception hierarchy shared by services, routes and the CLI."""

from typing import Optional


class StrebelError(Exception):
    """Base class for every error raised by the engine."""


class DomainError(StrebelError, ValueError):
    """A precondition of an operation does not hold."""


class UsageError(DomainError):
    """Malformed user input (diff-spec, flag values)."""


class NumericalError(StrebelError, ArithmeticError):
    """A numerical procedure failed to deliver its accuracy contract."""


class RootFindingError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class IndeterminateError(NumericalError):
    """0/0 at the evaluation point; the caller must use the normalized form."""


class SolverError(NumericalError):
    def __init__(self, message: str, best_residual: Optional[float] = None):
        super().__init__(message)
        self.best_residual = best_residual
