"""
Exception types raised across the laboratory.

Every error derives from a builtin (``ValueError``/``ArithmeticError``) so callers
that only know the builtins still catch them.
"""


class RepError(Exception):
    """Base class for all laboratory errors."""


class DomainError(RepError, ValueError):
    """An argument lies outside the domain of a physical relation (e.g. rho < 0)."""


class SuperluminalError(DomainError):
    """A velocity reached or exceeded the speed of light."""

    def __init__(self, message: str, cell_index: int | None = None):
        super().__init__(message)
        self.cell_index = cell_index


class RecoveryError(RepError, ArithmeticError):
    """Conserved-to-primitive recovery found no admissible root."""

    def __init__(self, message: str, cell_index: int):
        super().__init__(f"{message} (cell {cell_index})")
        self.cell_index = cell_index


class HypothesisViolation(RepError, ValueError):
    """Initial data violates p'(rho) < a c^2 somewhere on the grid."""

    def __init__(self, message: str, cell_index: int, pprime: float):
        super().__init__(message)
        self.cell_index = cell_index
        self.pprime = pprime


class InvalidTestingFunction(RepError, ValueError):
    """A testing function is not strictly increasing or does not vanish at 0."""


class ConfigError(RepError, ValueError):
    """A configuration file is missing a field or holds an invalid value."""

    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UsageError(RepError, ValueError):
    """An operation was called without the data it needs."""
