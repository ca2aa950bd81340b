"""Compatibility shim for public exceptions."""

from __future__ import annotations

from .core.exceptions import (
    CheckFailedError,
    ConfigurationError,
    DataIntegrityError,
    GeometryError,
    NoiseError,
    NonFiniteError,
    NumericalError,
    PaiError,
    ShapeMismatchError,
    StorageError,
)

__all__ = [
    "CheckFailedError",
    "ConfigurationError",
    "DataIntegrityError",
    "GeometryError",
    "NoiseError",
    "NonFiniteError",
    "NumericalError",
    "PaiError",
    "ShapeMismatchError",
    "StorageError",
]
