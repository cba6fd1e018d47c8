"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DimtruncError(Exception):
    pass


class ArgumentError(DimtruncError, ValueError):
    """An argument violates an operation's precondition."""


class NumericError(DimtruncError, ArithmeticError):
    """A numerical routine failed (non-convergence, overflow)."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class RefusedPrecondition(DimtruncError):
    """A bound was requested whose hypothesis cannot be certified."""

    def __init__(self, message: str, precondition: str):
        super().__init__(message)
        self.precondition = precondition


class ConfigurationError(DimtruncError, ValueError):
    """A Monte Carlo configuration cannot produce a publishable estimate."""
