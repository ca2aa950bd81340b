"""Raw float64 array files with JSON sidecars.

Payloads are little-endian IEEE-754 doubles in C order; ``<name>.meta.json``
next to each payload records dtype, shape, order and the payload's SHA-256.
Every write goes to a temporary file first and is renamed into place.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError

from invertible_pai.core.exceptions import DataIntegrityError, StorageError

log = structlog.get_logger(__name__)

PAYLOAD_DTYPE = np.dtype("<f8")
META_SUFFIX = ".meta.json"


class ArrayMeta(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dtype: Literal["<f8"] = "<f8"
    shape: tuple[int, ...]
    order: Literal["C"] = "C"
    sha256: str


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + META_SUFFIX)


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    temporary = path.with_name(f".{path.name}.tmp")
    try:
        temporary.write_bytes(payload)
        os.replace(temporary, path)
    except OSError as exc:
        message = f"Failed to write {path}: {exc}"
        raise StorageError(message) from exc


def write_array(path: Path, values: np.ndarray) -> str:
    """Persist `values` as float64 and return the payload checksum."""
    array = np.ascontiguousarray(values, dtype=PAYLOAD_DTYPE)
    payload = array.tobytes(order="C")
    checksum = sha256_bytes(payload)
    meta = ArrayMeta(shape=array.shape, sha256=checksum)
    atomic_write_bytes(path, payload)
    atomic_write_bytes(meta_path(path), meta.model_dump_json(indent=2).encode())
    log.debug("data.array_written", path=str(path), shape=array.shape)
    return checksum


def read_meta(path: Path) -> ArrayMeta:
    sidecar = meta_path(path)
    try:
        raw = sidecar.read_text(encoding="utf-8")
    except OSError as exc:
        message = f"Cannot read array header {sidecar}: {exc}"
        raise StorageError(message) from exc
    try:
        return ArrayMeta.model_validate_json(raw)
    except ValidationError as exc:
        message = f"Malformed array header {sidecar}: {exc.errors()[0]['msg']}"
        raise DataIntegrityError(message) from exc


def read_array(path: Path, expected_sha256: str | None = None) -> np.ndarray:
    """Load an array, verifying size and checksum against its header."""
    meta = read_meta(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        message = f"Cannot read array payload {path}: {exc}"
        raise StorageError(message) from exc
    checksum = sha256_bytes(payload)
    if checksum != meta.sha256 or (
        expected_sha256 is not None and checksum != expected_sha256
    ):
        message = f"Checksum mismatch for {path}."
        raise DataIntegrityError(message)
    count = int(np.prod(meta.shape, dtype=np.int64))
    if len(payload) != count * PAYLOAD_DTYPE.itemsize:
        message = f"{path} holds {len(payload)} bytes; header shape is {meta.shape}."
        raise DataIntegrityError(message)
    return np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(meta.shape).copy()


__all__ = [
    "ArrayMeta",
    "atomic_write_bytes",
    "meta_path",
    "read_array",
    "read_meta",
    "sha256_bytes",
    "write_array",
]
