"""Exception types shared across the package."""


class CpScreenError(Exception):
    """Base class for all cpscreen errors."""


class InvalidInputError(CpScreenError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(CpScreenError, ValueError):
    """Input is structurally valid but carries no usable signal."""


class ConvergenceError(CpScreenError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    Carries the final duality-gap estimate so callers can judge how far
    the run was from convergence.
    """

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class FormatError(CpScreenError, ValueError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(CpScreenError, ValueError):
    """A run configuration is malformed or names an unknown option."""
