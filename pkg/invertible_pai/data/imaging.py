"""Slices, maximum intensity projections and 16-bit PGM export."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal

import numpy as np

from invertible_pai.core.exceptions import (
    DataIntegrityError,
    GeometryError,
    ShapeMismatchError,
    StorageError,
)
from invertible_pai.data.arrays import atomic_write_bytes
from invertible_pai.wave.fields import Volume, require_finite

PGM_MAXVAL = 65535


class Axis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"

    @property
    def index(self) -> int:
        return {"x": 0, "y": 1, "z": 2}[self.value]


def mip(x: Volume, axis: Axis) -> np.ndarray:
    """Maximum along `axis` of the (nx, ny, nz) volume."""
    return x.values.max(axis=axis.index)


def slice_image(x: Volume, axis: Axis, index: int) -> np.ndarray:
    size = x.values.shape[axis.index]
    if not 0 <= index < size:
        message = f"Slice index {index} is outside [0, {size}) along {axis.value}."
        raise GeometryError(message)
    return np.take(x.values, index, axis=axis.index)


@dataclass(frozen=True, slots=True)
class Normalization:
    kind: Literal["minmax", "fixed"]
    peak: float | None = None

    @classmethod
    def minmax(cls) -> Normalization:
        return cls("minmax")

    @classmethod
    def fixed(cls, peak: float) -> Normalization:
        if not peak > 0:
            message = f"Fixed normalization needs a positive peak; got {peak}."
            raise ValueError(message)
        return cls("fixed", peak)


def quantize(image: np.ndarray, normalization: Normalization) -> tuple[np.ndarray, str]:
    """Map an image to 0..65535 (round half up) and describe the mapping.

    A constant image under minmax normalization maps to all zeros.
    """
    values = np.asarray(image, dtype=np.float64)
    require_finite(values, "Image")
    if normalization.kind == "fixed":
        peak = float(normalization.peak or 1.0)
        unit = np.clip(values / peak, 0.0, 1.0)
        description = f"normalization=fixed peak={peak!r}"
    else:
        low, high = float(values.min()), float(values.max())
        unit = (values - low) / (high - low) if high > low else np.zeros_like(values)
        description = f"normalization=minmax min={low!r} max={high!r}"
    samples = np.floor(unit * PGM_MAXVAL + 0.5).astype(np.uint16)
    return samples, description


def export_pgm(image: np.ndarray, path: Path, normalization: Normalization) -> Path:
    """Write a binary 16-bit PGM plus a one-line ``<path>.txt`` sidecar."""
    if image.ndim != 2:  # noqa: PLR2004
        message = f"PGM export needs a 2D image; got shape {image.shape}."
        raise ShapeMismatchError(message)
    samples, description = quantize(image, normalization)
    height, width = samples.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    atomic_write_bytes(path, header + samples.astype(">u2").tobytes())
    sidecar = path.with_name(path.name + ".txt")
    atomic_write_bytes(sidecar, f"{description}\n".encode("utf-8"))
    return path


def read_pgm(path: Path) -> np.ndarray:
    """Parse a binary 16-bit PGM written by `export_pgm`."""
    try:
        raw = path.read_bytes()
    except OSError as exc:
        message = f"Cannot read {path}: {exc}"
        raise StorageError(message) from exc
    tokens: list[bytes] = []
    cursor = 0
    while len(tokens) < 4:  # noqa: PLR2004
        while cursor < len(raw) and raw[cursor : cursor + 1].isspace():
            cursor += 1
        start = cursor
        while cursor < len(raw) and not raw[cursor : cursor + 1].isspace():
            cursor += 1
        if start == cursor:
            message = f"{path} has a truncated PGM header."
            raise DataIntegrityError(message)
        tokens.append(raw[start:cursor])
    magic, width, height, maxval = tokens
    if magic != b"P5" or int(maxval) != PGM_MAXVAL:
        message = f"{path} is not a 16-bit binary PGM."
        raise DataIntegrityError(message)
    payload = raw[cursor + 1 :]
    shape = (int(height), int(width))
    if len(payload) != 2 * shape[0] * shape[1]:
        message = f"{path} payload does not match its {shape} header."
        raise DataIntegrityError(message)
    return np.frombuffer(payload, dtype=">u2").reshape(shape).astype(np.uint16)


__all__ = [
    "Axis",
    "Normalization",
    "export_pgm",
    "mip",
    "quantize",
    "read_pgm",
    "slice_image",
]
