"""Exception types shared across the toolkit."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ThinningRequired(DomainError):
    """The requested coincidence probability is below the gated model's natural range."""


class MalformedInputError(ValueError):
    """Event data violates a structural precondition (duplicate sides, bad rows, ...)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IncompleteDataError(ValueError):
    """A statistic cannot be formed because some chained pair has no usable data."""
