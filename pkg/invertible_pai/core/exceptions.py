"""Exception hierarchy for invertible-pai.

Every error carries the process exit code the CLI reports for it.
"""

from __future__ import annotations


class PaiError(Exception):
    """Base exception for all invertible-pai errors."""

    exit_code: int = 1


class ConfigurationError(PaiError):
    """Raised when the run configuration is invalid or inconsistent."""

    exit_code = 2


class ShapeMismatchError(PaiError, ValueError):
    """Raised when arrays do not match the grid, geometry or layer layout."""

    exit_code = 2


class GeometryError(PaiError, ValueError):
    """Raised for receiver layouts that do not fit the simulation grid."""

    exit_code = 2


class NoiseError(PaiError, ValueError):
    """Raised when a noise level cannot be derived from the signal."""

    exit_code = 2


class NonFiniteError(PaiError, ValueError):
    """Raised when a field or trace array holds NaN or infinite values."""

    exit_code = 4


class NumericalError(PaiError):
    """Raised when training diverges (NaN or infinite loss)."""

    exit_code = 4

    def __init__(
        self, message: str, *, diagnostics: dict[str, object] | None = None
    ) -> None:
        """Store the failure message and the state that produced it."""
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StorageError(PaiError):
    """Raised when reading or writing artifacts fails."""

    exit_code = 3


class DataIntegrityError(PaiError):
    """Raised when a stored artifact fails its checksum or manifest check."""

    exit_code = 1


class CheckFailedError(PaiError):
    """Raised when a verification check does not pass."""

    exit_code = 1
