"""
Custom exceptions for cfshift.

Every error raised on purpose by the library derives from CFShiftError so
the CLI can map it to an exit code.
"""

from typing import Optional, Sequence


class CFShiftError(Exception):
    """Base exception for all cfshift errors."""
    pass


# ============================================================================
# Argument Validation
# ============================================================================

class InvalidArgumentError(CFShiftError, ValueError):
    """An argument violates an operation's precondition."""
    pass


class DimensionMismatchError(InvalidArgumentError):
    """Feature, bank or model dimensions do not agree."""
    def __init__(self, message: str, expected: int, actual: int):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


# ============================================================================
# Dataset Exceptions
# ============================================================================

class DatasetError(CFShiftError):
    """Base exception for dataset problems."""
    pass


class DatasetParseError(DatasetError):
    """Embedding CSV could not be parsed."""
    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UnknownDomainError(DatasetError):
    """A domain tag is not present in the dataset."""
    def __init__(self, domain: str, available: Sequence[str]):
        super().__init__(f"Unknown domain '{domain}' (available: {', '.join(available) or 'none'})")
        self.domain = domain
        self.available = list(available)


# ============================================================================
# Model Persistence
# ============================================================================

class CheckpointFormatError(CFShiftError):
    """Checkpoint file is truncated or has the wrong header."""
    pass


# ============================================================================
# CLI
# ============================================================================

class UsageError(CFShiftError):
    """Command-line flags are inconsistent."""
    pass


# ============================================================================
# Warnings
# ============================================================================

class SingleDomainWarning(UserWarning):
    """CFL requested with fewer than two domains; the term is taken as 0."""
    pass


class ConvergenceWarning(UserWarning):
    """Power iteration stopped at the iteration cap."""
    pass
