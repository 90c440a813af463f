"""Exception hierarchy shared by all modules."""


class ChernoffError(Exception):
    """Base class for errors raised by this package."""


class DomainError(ChernoffError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedModeError(ChernoffError):
    """The requested evaluation mode is not available for this input."""


class NumericalError(ChernoffError, ArithmeticError):
    """A numerical routine produced an unusable result."""


class SolverError(NumericalError):
    """A fixed-point iteration failed to converge."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class QuadratureError(NumericalError):
    """A quadrature rule did not reach its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (achieved residual={residual:.3e})")
        self.residual = residual


class ConfigError(ChernoffError, ValueError):
    """An experiment configuration failed validation."""
