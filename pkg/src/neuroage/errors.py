"""Exception types shared across the package."""


class NeuroageError(Exception):
    """Base class for package errors."""


class ConfigError(NeuroageError):
    """Invalid or inconsistent run configuration."""


class DomainError(NeuroageError, ValueError):
    """Arguments outside the physical domain (negative age or input)."""


class UnsupportedOperationError(NeuroageError):
    """Operation not defined for this model variant."""


class InfeasibleDeltaError(NeuroageError):
    """Exponential moment diverges at the requested exponent."""


class RegimeError(NeuroageError):
    """Operation requires the activity feedback gain kappa < 1."""


class BracketError(NeuroageError):
    """Root bracketing failed: no sign change on the scanned interval."""


class ClosureError(NeuroageError):
    """Activity closure did not converge."""


class ConvergenceError(NeuroageError):
    """Iterative solver did not converge."""


class IntegratorError(NeuroageError):
    """Time integration produced an invalid state."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
