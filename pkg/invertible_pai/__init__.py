"""Learned iterative photoacoustic reconstruction with invertible networks."""

from .exceptions import (
    CheckFailedError,
    ConfigurationError,
    DataIntegrityError,
    NumericalError,
    PaiError,
    StorageError,
)
from .wave import SimGrid, SolveCounter, Traces, Volume, WaveOperator

__all__ = [
    "CheckFailedError",
    "ConfigurationError",
    "DataIntegrityError",
    "NumericalError",
    "PaiError",
    "SimGrid",
    "SolveCounter",
    "StorageError",
    "Traces",
    "Volume",
    "WaveOperator",
]
