"""Configuration and the exception hierarchy."""

from importlib import import_module

from .exceptions import (
    CheckFailedError,
    ConfigurationError,
    DataIntegrityError,
    NumericalError,
    PaiError,
    StorageError,
)

__all__ = [
    "CheckFailedError",
    "ConfigurationError",
    "DataIntegrityError",
    "NumericalError",
    "PaiError",
    "RunConfig",
    "StorageError",
]


def __getattr__(name: str) -> object:
    # config imports every section model, which in turn import core.exceptions.
    if name == "RunConfig":
        _config = import_module("invertible_pai.core.config")
        return _config.RunConfig
    message = f"module 'invertible_pai.core' has no attribute {name}"
    raise AttributeError(message)
