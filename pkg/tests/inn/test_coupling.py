"""Tests for conditioned additive coupling layers and squeezing."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.inn.cache import ActivationCache
from invertible_pai.inn.conv import ConvKernel
from invertible_pai.inn.coupling import (
    CouplingLayerParams,
    coupling_backward,
    coupling_forward,
    coupling_inverse,
)
from invertible_pai.inn.squeeze import squeeze, unsqueeze


def _layer(rng, channels=4, cond=1, hidden=5, parity=0, scale=0.3, dtype="float64"):
    half = channels // 2
    w1 = rng.standard_normal((hidden, half + cond, 3, 3)) * scale
    w2 = rng.standard_normal((half, hidden, 3, 3)) * scale
    return CouplingLayerParams(
        ConvKernel(w1.astype(dtype), rng.standard_normal(hidden).astype(dtype)),
        ConvKernel(w2.astype(dtype), rng.standard_normal(half).astype(dtype)),
        parity=parity,
    )


def test_zero_weight_layer_is_identity(rng):
    """f == 0 leaves the state unchanged in both directions."""
    layer = _layer(rng)
    layer = layer.with_arrays([np.zeros_like(a) for a in layer.arrays()])
    state = rng.standard_normal((4, 6, 6))
    cond = rng.standard_normal((1, 6, 6))
    np.testing.assert_array_equal(coupling_forward(state, cond, layer), state)
    np.testing.assert_array_equal(coupling_inverse(state, cond, layer), state)


@pytest.mark.parametrize("parity", [0, 1])
@pytest.mark.parametrize(
    ("dtype", "tolerance"), [("float64", 1e-12), ("float32", 1e-5)]
)
def test_round_trip(rng, parity, dtype, tolerance):
    """inverse(forward(x)) and forward(inverse(x)) both return x."""
    layer = _layer(rng, parity=parity, dtype=dtype)
    state = rng.standard_normal((4, 6, 6)).astype(dtype)
    cond = rng.standard_normal((1, 6, 6)).astype(dtype)
    restored = coupling_inverse(coupling_forward(state, cond, layer), cond, layer)
    assert np.abs(restored - state).max() < tolerance
    again = coupling_forward(coupling_inverse(state, cond, layer), cond, layer)
    assert np.abs(again - state).max() < tolerance


@pytest.mark.parametrize(("parity", "kept"), [(0, slice(0, 2)), (1, slice(2, 4))])
def test_passthrough_half_is_bit_identical(rng, parity, kept):
    """Only the transformed half changes."""
    layer = _layer(rng, parity=parity)
    state = rng.standard_normal((4, 6, 6))
    out = coupling_forward(state, rng.standard_normal((1, 6, 6)), layer)
    np.testing.assert_array_equal(out[kept], state[kept])
    assert not np.array_equal(out, state)


def test_backward_reconstructs_input_and_clears_cache(rng):
    """The backward pass recovers the layer input and holds three activations."""
    layer = _layer(rng)
    state = rng.standard_normal((4, 6, 6))
    cond = rng.standard_normal((1, 6, 6))
    out = coupling_forward(state, cond, layer)
    cache = ActivationCache()
    result = coupling_backward(out, np.ones_like(out), cond, layer, cache)
    assert np.abs(result.state_in - state).max() < 1e-12
    assert len(cache) == 0
    assert cache.stats.peak_cached_tensors == 3
    assert result.grad_cond.shape == cond.shape


def test_layer_shape_errors(rng):
    """Odd channel counts and mismatched conditioning are rejected."""
    layer = _layer(rng)
    with pytest.raises(ShapeMismatchError, match="even"):
        coupling_forward(rng.standard_normal((3, 6, 6)), np.zeros((1, 6, 6)), layer)
    with pytest.raises(ShapeMismatchError):
        coupling_forward(rng.standard_normal((4, 6, 6)), np.zeros((1, 4, 4)), layer)
    with pytest.raises(ShapeMismatchError):
        CouplingLayerParams(layer.conv1, layer.conv2, parity=2)


def test_squeeze_moves_space_into_channels(rng):
    """4 channels of 8x8 become 16 channels of 4x4 with the same values."""
    field = rng.standard_normal((4, 8, 8))
    squeezed = squeeze(field)
    assert squeezed.shape == (16, 4, 4)
    np.testing.assert_array_equal(np.sort(squeezed.ravel()), np.sort(field.ravel()))


@pytest.mark.parametrize("shape", [(2, 6, 4), (3, 4, 4, 8)])
def test_unsqueeze_inverts_squeeze_bitwise(rng, shape):
    """The rearrangement is an exact permutation in 2D and 3D."""
    field = rng.standard_normal(shape)
    restored = unsqueeze(squeeze(field))
    assert restored.tobytes() == field.tobytes()


def test_squeeze_of_constant_channels_is_constant(rng):
    """Each output channel of a per-channel constant field is constant."""
    field = np.stack([np.full((4, 4), value) for value in (1.0, -2.0)])
    squeezed = squeeze(field)
    for channel in squeezed:
        assert np.all(channel == channel.flat[0])


def test_squeeze_rejects_odd_spatial_shape(rng):
    """Only even extents can be halved."""
    with pytest.raises(ShapeMismatchError):
        squeeze(rng.standard_normal((2, 5, 4)))
    with pytest.raises(ShapeMismatchError):
        unsqueeze(rng.standard_normal((3, 2, 2)))
