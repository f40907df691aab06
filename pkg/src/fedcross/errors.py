"""Exception types raised across the simulator.

Every class derives from :class:`FedCrossError`, and most also derive from
the builtin exception a caller would naturally catch (``ValueError`` for bad
input, ``ArithmeticError`` for numerical blow-ups).
"""

from __future__ import annotations


class FedCrossError(Exception):
    """Base class for all simulator errors."""


class ConfigError(FedCrossError, ValueError):
    """Invalid configuration value, size or range."""


class DimensionError(FedCrossError, ValueError):
    """Parameter vectors or arrays have incompatible lengths."""


class NumericError(FedCrossError, ArithmeticError):
    """A computation produced NaN or infinity."""


class UndefinedSimilarityError(FedCrossError, ValueError):
    """Cosine similarity requested for an all-zero vector."""


class EmptyPoolError(FedCrossError, ValueError):
    """An aggregation received no models."""


class PoolTooSmallError(FedCrossError, ValueError):
    """Collaborator selection needs at least two middleware models."""


class PartitionError(FedCrossError, RuntimeError):
    """Resampling budget exhausted before a feasible partition was found."""


class EmptyClientError(FedCrossError, ValueError):
    """Local training was asked to run on a client with no samples."""


class InputFormatError(FedCrossError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
