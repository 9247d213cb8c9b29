"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes; see ``mannerist.cli``.
"""

from __future__ import annotations


class MannersError(Exception):
    """Base class for all toolkit errors."""


class ParseError(MannersError):
    """A feature file is malformed (bad header, arity, or a non-numeric field)."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class OrderingError(MannersError):
    """An ordering constraint is violated (timestamps, frame indices, pair indices)."""


class ValidationError(MannersError):
    """A stream failed validation and cannot enter the pipeline."""


class DegenerateGeometryError(MannersError):
    """Gesture normalization was asked to use a non-positive head height."""


class InsufficientDataError(MannersError):
    """Too few frames/clips/scores for the requested operation."""


class IncompatibilityError(MannersError):
    """Model and data disagree on the canonical feature order."""


class SchemaError(MannersError):
    """A serialized artifact does not match its declared schema or version."""


class ConvergenceError(MannersError):
    """The dual solver did not reach the KKT tolerance within its iteration budget."""

    def __init__(self, message: str, kkt_violation: float):
        super().__init__(f"{message} (KKT violation {kkt_violation:.3e})")
        self.kkt_violation = kkt_violation
