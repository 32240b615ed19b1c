"""Exception types raised across the package."""


class MocuError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MocuError, ValueError):
    pass


class InvalidModelError(MocuError, ValueError):
    """A model cannot be simulated (for example it still has unknown edge signs)."""


class EvaluationError(MocuError, ArithmeticError):
    """A cost procedure produced a non-finite or negative value."""


class ConvergenceError(MocuError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class LoadError(MocuError, ValueError):
    """A network definition failed validation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
