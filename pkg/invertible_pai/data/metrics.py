"""Reconstruction quality measures."""

from __future__ import annotations

import math

import numpy as np

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.wave.fields import Volume


def mse(a: Volume, b: Volume) -> float:
    if a.values.shape != b.values.shape:
        message = (
            f"Cannot compare volumes of shape {a.values.shape} and {b.values.shape}."
        )
        raise ShapeMismatchError(message)
    return float(np.mean((a.values - b.values) ** 2))


def psnr(a: Volume, b: Volume, peak: float) -> float:
    """20 log10(peak) - 10 log10(mse) in dB; ``math.inf`` for identical volumes."""
    error = mse(a, b)
    if error == 0.0:
        return math.inf
    return 20.0 * math.log10(peak) - 10.0 * math.log10(error)


__all__ = ["mse", "psnr"]
