"""Conditioned additive coupling layers.

A layer splits its state into halves (a, b) and returns (a, b + f([a, cond]))
where ``f = conv -> leaky ReLU -> conv`` and ``cond`` is a side input that
never has to be inverted. The parity bit selects which half is transformed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.inn.cache import ActivationCache
from invertible_pai.inn.conv import (
    ConvKernel,
    conv_backward,
    conv_forward,
    leaky_relu,
    leaky_relu_backward,
)

DEFAULT_SLOPE = 0.1


@dataclass(frozen=True, eq=False)
class CouplingLayerParams:
    conv1: ConvKernel
    conv2: ConvKernel
    parity: int
    slope: float = DEFAULT_SLOPE

    def __post_init__(self) -> None:
        if self.conv1.out_channels != self.conv2.in_channels:
            message = (
                f"Hidden width mismatch: conv1 gives {self.conv1.out_channels}, "
                f"conv2 expects {self.conv2.in_channels}."
            )
            raise ShapeMismatchError(message)
        if self.conv1.in_channels <= self.conv2.out_channels:
            message = "conv1 must see the passthrough half plus conditioning."
            raise ShapeMismatchError(message)
        if self.parity not in (0, 1):
            message = f"Parity must be 0 or 1; got {self.parity}."
            raise ShapeMismatchError(message)

    @property
    def half(self) -> int:
        return self.conv2.out_channels

    @property
    def channels(self) -> int:
        return 2 * self.half

    @property
    def conditioning_channels(self) -> int:
        return self.conv1.in_channels - self.half

    def arrays(self) -> list[np.ndarray]:
        conv1, conv2 = self.conv1, self.conv2
        return [conv1.weights, conv1.bias, conv2.weights, conv2.bias]

    def with_arrays(self, arrays: list[np.ndarray]) -> CouplingLayerParams:
        w1, b1, w2, b2 = arrays
        return CouplingLayerParams(
            ConvKernel(w1, b1), ConvKernel(w2, b2), self.parity, self.slope
        )


def _split(state: np.ndarray, parity: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (passthrough, transformed) halves."""
    half = state.shape[0] // 2
    first, second = state[:half], state[half:]
    return (first, second) if parity == 0 else (second, first)


def _merge(passthrough: np.ndarray, transformed: np.ndarray, parity: int) -> np.ndarray:
    pair = (passthrough, transformed) if parity == 0 else (transformed, passthrough)
    return np.concatenate(pair, axis=0)


def _check(state: np.ndarray, cond: np.ndarray, params: CouplingLayerParams) -> None:
    if state.shape[0] % 2:
        message = f"Coupling needs an even channel count; got {state.shape[0]}."
        raise ShapeMismatchError(message)
    if state.shape[0] != params.channels:
        message = (
            f"State has {state.shape[0]} channels; layer expects {params.channels}."
        )
        raise ShapeMismatchError(message)
    if (
        cond.shape[0] != params.conditioning_channels
        or cond.shape[1:] != state.shape[1:]
    ):
        message = (
            f"Conditioning shape {cond.shape} does not fit state {state.shape} "
            f"with {params.conditioning_channels} conditioning channels."
        )
        raise ShapeMismatchError(message)


def residual(
    passthrough: np.ndarray,
    cond: np.ndarray,
    params: CouplingLayerParams,
    cache: ActivationCache | None = None,
) -> np.ndarray:
    """f([a, cond]); intermediates go to `cache` when one is given."""
    inputs = np.concatenate((passthrough, cond.astype(passthrough.dtype)), axis=0)
    hidden = conv_forward(inputs, params.conv1)
    activated = leaky_relu(hidden, params.slope)
    if cache is not None:
        cache.put("inputs", inputs)
        cache.put("hidden", hidden)
        cache.put("activated", activated)
    return conv_forward(activated, params.conv2)


def coupling_forward(
    state: np.ndarray,
    cond: np.ndarray,
    params: CouplingLayerParams,
    cache: ActivationCache | None = None,
) -> np.ndarray:
    _check(state, cond, params)
    passthrough, transformed = _split(state, params.parity)
    update = residual(passthrough, cond, params, cache)
    if cache is not None:
        cache.clear()
    return _merge(passthrough, transformed + update, params.parity)


def coupling_inverse(
    state_out: np.ndarray, cond: np.ndarray, params: CouplingLayerParams
) -> np.ndarray:
    _check(state_out, cond, params)
    passthrough, transformed = _split(state_out, params.parity)
    return _merge(
        passthrough, transformed - residual(passthrough, cond, params), params.parity
    )


@dataclass(frozen=True, eq=False)
class CouplingGradients:
    state_in: np.ndarray
    grad_in: np.ndarray
    grad_params: CouplingLayerParams
    grad_cond: np.ndarray


def coupling_backward(
    state_out: np.ndarray,
    grad_out: np.ndarray,
    cond: np.ndarray,
    params: CouplingLayerParams,
    cache: ActivationCache,
) -> CouplingGradients:
    """Invert the layer, recompute f once, and backpropagate through it.

    The cache holds only this layer's activations and is cleared on return.
    """
    _check(state_out, cond, params)
    passthrough, transformed = _split(state_out, params.parity)
    grad_pass, grad_trans = _split(grad_out, params.parity)
    update = residual(passthrough, cond, params, cache)
    transformed_in = transformed - update

    grad_activated, grad_conv2 = conv_backward(
        cache.get("activated"), params.conv2, grad_trans
    )
    grad_hidden = leaky_relu_backward(cache.get("hidden"), grad_activated, params.slope)
    grad_inputs, grad_conv1 = conv_backward(
        cache.get("inputs"), params.conv1, grad_hidden
    )
    cache.clear()

    half = params.half
    return CouplingGradients(
        state_in=_merge(passthrough, transformed_in, params.parity),
        grad_in=_merge(grad_pass + grad_inputs[:half], grad_trans, params.parity),
        grad_params=CouplingLayerParams(
            grad_conv1, grad_conv2, params.parity, params.slope
        ),
        grad_cond=grad_inputs[half:],
    )


__all__ = [
    "DEFAULT_SLOPE",
    "CouplingGradients",
    "CouplingLayerParams",
    "coupling_backward",
    "coupling_forward",
    "coupling_inverse",
    "residual",
]
