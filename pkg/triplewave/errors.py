"""
Error hierarchy shared by all triplewave modules.
"""

from typing import Any, Optional


class TripleWaveError(Exception):
    """Base class for every error raised by triplewave."""


class DomainError(TripleWaveError):
    """A point or parameter lies outside the domain of a formula."""


class ArgumentError(TripleWaveError):
    """An argument is malformed (empty, mismatched, wrong shape)."""


class PreconditionError(TripleWaveError):
    """An input violates the precondition of an operation."""


class UnsupportedError(TripleWaveError):
    """The requested feature is not available for this input."""


class IntegrationError(TripleWaveError):
    """
    Ray integration failed.

    Args:
        message: Human readable reason
        last_state: Last good phase-space state (s, y, eta) if any
    """

    def __init__(self, message: str, last_state: Optional[Any] = None):
        super().__init__(message)
        self.last_state = last_state


class CausticError(TripleWaveError):
    """Amplitude transport reached a vanishing ray-tube Jacobian."""

    def __init__(self, message: str, s: float):
        super().__init__(message)
        self.s = s


class NumericError(TripleWaveError):
    """A non-finite value or failed numerical derivative."""

    def __init__(self, message: str, location: Optional[Any] = None):
        super().__init__(message)
        self.location = location


class ConfigError(TripleWaveError):
    """
    Run configuration failed validation.

    Args:
        message: Human readable reason
        field: Dotted path of the offending key
        line: 1-based line number in the config file, when known
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f" [field: {field}]"
        if line:
            where += f" [line: {line}]"
        super().__init__(f"{message}{where}")


class HypothesisWarning(UserWarning):
    """Orders outside the range where the triple-interaction estimate applies."""


class InsufficientDataError(ArgumentError):
    """Too few samples to form an estimate."""
