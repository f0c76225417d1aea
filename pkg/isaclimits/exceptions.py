"""Exceptions for isaclimits."""


class IsacError(Exception):
    """Base class for all errors raised by this app."""


class ConfigError(IsacError, ValueError):
    """A parameter or parameter combination is invalid."""


class NumericalError(IsacError, ArithmeticError):
    """A matrix that must be positive definite could not be factorized."""

    def __init__(self, message: str, condition: float = None):
        if condition is not None:
            message = f"{message} (condition number {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class RegionError(IsacError, ValueError):
    """A region curve violates its ordering invariants."""
