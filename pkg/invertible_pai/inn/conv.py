"""Zero-padded multichannel convolution with hand-derived gradients.

Fields are arrays of shape (channels, *spatial) with 2 or 3 spatial axes.
Kernels are cubic with an odd extent, so padding by ``k // 2`` keeps the
spatial shape.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from invertible_pai.core.exceptions import ShapeMismatchError


@dataclass(frozen=True, eq=False)
class ConvKernel:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights)
        bias = np.asarray(self.bias)
        if weights.ndim < 4:  # noqa: PLR2004
            message = f"Kernel weights need (out, in, k, k[, k]); got {weights.shape}."
            raise ShapeMismatchError(message)
        extents = weights.shape[2:]
        if len(set(extents)) != 1 or extents[0] % 2 == 0:
            message = f"Kernel extent must be cubic and odd; got {extents}."
            raise ShapeMismatchError(message)
        if bias.shape != (weights.shape[0],):
            message = (
                f"Bias shape {bias.shape} does not match {weights.shape[0]} outputs."
            )
            raise ShapeMismatchError(message)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def out_channels(self) -> int:
        return int(self.weights.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.weights.shape[1])

    @property
    def size(self) -> int:
        return int(self.weights.shape[2])

    @property
    def ndim(self) -> int:
        return self.weights.ndim - 2


def _offsets(kernel: ConvKernel) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(kernel.size), repeat=kernel.ndim)


def _window(offset: tuple[int, ...], spatial: tuple[int, ...]) -> tuple[slice, ...]:
    return (slice(None),) + tuple(
        slice(start, start + n) for start, n in zip(offset, spatial, strict=True)
    )


def _check(field: np.ndarray, kernel: ConvKernel) -> None:
    if field.ndim != kernel.ndim + 1:
        message = (
            f"Field with {field.ndim - 1} spatial axes cannot use a "
            f"{kernel.ndim}D kernel."
        )
        raise ShapeMismatchError(message)
    if field.shape[0] != kernel.in_channels:
        message = (
            f"Field has {field.shape[0]} channels; kernel expects "
            f"{kernel.in_channels}."
        )
        raise ShapeMismatchError(message)
    if any(n < kernel.size for n in field.shape[1:]):
        message = f"Spatial shape {field.shape[1:]} is smaller than the kernel."
        raise ShapeMismatchError(message)


def _pad(field: np.ndarray, kernel: ConvKernel) -> np.ndarray:
    half = kernel.size // 2
    return np.pad(field, [(0, 0)] + [(half, half)] * kernel.ndim)


def conv_forward(field: np.ndarray, kernel: ConvKernel) -> np.ndarray:
    """Cross-correlate ``field`` with ``kernel`` and add the bias."""
    _check(field, kernel)
    spatial = field.shape[1:]
    padded = _pad(field, kernel)
    dtype = np.result_type(field, kernel.weights)
    out = np.empty((kernel.out_channels, *spatial), dtype=dtype)
    out[...] = kernel.bias.reshape((-1,) + (1,) * kernel.ndim)
    for offset in _offsets(kernel):
        taps = kernel.weights[(slice(None), slice(None), *offset)]
        out += np.tensordot(taps, padded[_window(offset, spatial)], axes=(1, 0))
    return out


def conv_backward(
    field: np.ndarray, kernel: ConvKernel, grad_out: np.ndarray
) -> tuple[np.ndarray, ConvKernel]:
    """Gradients of conv_forward w.r.t. its input and its kernel."""
    _check(field, kernel)
    spatial = field.shape[1:]
    if grad_out.shape != (kernel.out_channels, *spatial):
        message = (
            f"Output gradient shape {grad_out.shape} does not match "
            f"{(kernel.out_channels, *spatial)}."
        )
        raise ShapeMismatchError(message)
    padded = _pad(field, kernel)
    grad_padded = np.zeros_like(padded, dtype=np.result_type(padded, grad_out))
    grad_weights = np.zeros_like(kernel.weights)
    spatial_axes = list(range(1, kernel.ndim + 1))
    for offset in _offsets(kernel):
        window = _window(offset, spatial)
        taps = kernel.weights[(slice(None), slice(None), *offset)]
        grad_padded[window] += np.tensordot(taps, grad_out, axes=(0, 0))
        grad_weights[(slice(None), slice(None), *offset)] = np.tensordot(
            grad_out, padded[window], axes=(spatial_axes, spatial_axes)
        )
    half = kernel.size // 2
    interior = (slice(None),) + tuple(slice(half, half + n) for n in spatial)
    grad_bias = grad_out.sum(axis=tuple(spatial_axes)).astype(kernel.bias.dtype)
    return grad_padded[interior], ConvKernel(grad_weights, grad_bias)


def leaky_relu(values: np.ndarray, slope: float) -> np.ndarray:
    return np.where(values > 0, values, slope * values)


def leaky_relu_backward(
    values: np.ndarray, grad_out: np.ndarray, slope: float
) -> np.ndarray:
    return grad_out * np.where(values > 0, 1.0, slope).astype(grad_out.dtype)


__all__ = [
    "ConvKernel",
    "conv_backward",
    "conv_forward",
    "leaky_relu",
    "leaky_relu_backward",
]
