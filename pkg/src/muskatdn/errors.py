"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: validation errors -> 2, monitor
breaches -> 3, numerical failures -> 4.
"""


class MuskatError(Exception):
    """Base class for all package errors."""


class ValidationError(MuskatError, ValueError):
    """Invalid configuration, parameters, or input data."""


class ConfigError(ValidationError):
    """Config-file error carrying the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MultiplierSymmetryError(ValidationError):
    """Non-Hermitian multiplier applied with a real-output request."""


class SeparationError(ValidationError):
    """Interface too close to a rigid boundary for the requested solve."""


class FlatteningError(MuskatError):
    """Jacobian lower bound unattainable after the retry loop."""


class NumericalError(MuskatError):
    """Numerical failure (Krylov non-convergence, time-step underflow)."""


class KrylovError(NumericalError):
    """Iterative linear solver failed to reach tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class MonitorBreach(MuskatError):
    """A theorem-hypothesis monitor dropped below its threshold."""

    def __init__(self, message, monitor=None, value=None):
        self.monitor = monitor
        self.value = value
        super().__init__(message)
