"""Invertible space-to-channel rearrangement by a factor 2 per spatial axis."""

from __future__ import annotations

import numpy as np

from invertible_pai.core.exceptions import ShapeMismatchError


def squeeze(field: np.ndarray) -> np.ndarray:
    """(C, n1, .., nd) -> (C * 2**d, n1/2, .., nd/2)."""
    channels, spatial = field.shape[0], field.shape[1:]
    if any(n % 2 for n in spatial):
        message = f"Cannot squeeze odd spatial shape {spatial}."
        raise ShapeMismatchError(message)
    nd = len(spatial)
    split: list[int] = [channels]
    for n in spatial:
        split += [n // 2, 2]
    order = [0] + [2 + 2 * i for i in range(nd)] + [1 + 2 * i for i in range(nd)]
    coarse = tuple(n // 2 for n in spatial)
    return field.reshape(split).transpose(order).reshape((channels * 2**nd, *coarse))


def unsqueeze(field: np.ndarray) -> np.ndarray:
    """Exact inverse of `squeeze`."""
    spatial = field.shape[1:]
    nd = len(spatial)
    group = 2**nd
    if field.shape[0] % group:
        message = f"{field.shape[0]} channels cannot be unsqueezed over {nd} axes."
        raise ShapeMismatchError(message)
    channels = field.shape[0] // group
    order = [0]
    for i in range(nd):
        order += [1 + nd + i, 1 + i]
    fine = tuple(2 * n for n in spatial)
    return (
        field.reshape((channels,) + (2,) * nd + spatial)
        .transpose(order)
        .reshape((channels, *fine))
    )


__all__ = ["squeeze", "unsqueeze"]
