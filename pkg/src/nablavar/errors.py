"""Exception types shared across the package."""


class NablavarError(Exception):
    """Base class for all package errors."""


class TimeScaleError(NablavarError, ValueError):
    """Invalid arguments when building a time scale."""


class NotAMemberError(NablavarError, KeyError):
    """A point was expected to belong to a time scale but does not."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ExprError(NablavarError, ValueError):
    """Base class for expression problems."""


class ParseError(ExprError):
    """Syntax error in an expression, carrying the character offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnboundParameterError(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Expression evaluated outside the domain of one of its functions."""


class SolverError(NablavarError, RuntimeError):
    pass


class SolverFailure(SolverError):
    """Newton iteration did not reach the requested tolerance."""

    def __init__(self, message, residual_norm, iterations):
        super().__init__(f"{message} (max |residual| = {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularSystemError(SolverError):
    """The Newton system is singular and inconsistent."""

    def __init__(self, message, residual_norm):
        super().__init__(message)
        self.residual_norm = residual_norm


class RegressivityWarning(UserWarning):
    """The dynamics' x-partial violates nu-regressivity along a trajectory."""
