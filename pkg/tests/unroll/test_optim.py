"""Tests for the Adam update."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.unroll.optim import OptimizerState, TrainConfig, adam_update


def test_first_step_moves_by_the_learning_rate():
    """After bias correction the first step is -lr * sign(grad)."""
    cfg = TrainConfig(learning_rate=1e-3)
    params = [np.zeros(3), np.ones((2, 2))]
    grads = [np.array([1.0, -4.0, 0.0]), np.full((2, 2), 0.5)]
    new, opt = adam_update(params, grads, OptimizerState.zeros_like(params), cfg)
    np.testing.assert_allclose(new[0], [-1e-3, 1e-3, 0.0], rtol=1e-6)
    np.testing.assert_allclose(new[1], np.full((2, 2), 1.0 - 1e-3), rtol=1e-6)
    assert opt.step == 1


def test_inputs_are_not_modified():
    params = [np.arange(4.0)]
    grads = [np.ones(4)]
    opt = OptimizerState.zeros_like(params)
    adam_update(params, grads, opt, TrainConfig())
    np.testing.assert_array_equal(params[0], np.arange(4.0))
    assert not opt.first_moment[0].any()
    assert opt.step == 0


def test_single_precision_parameters_keep_their_dtype():
    """Moments stay in double precision."""
    params = [np.ones(5, dtype=np.float32)]
    grads = [np.ones(5, dtype=np.float32)]
    opt = OptimizerState.zeros_like(params)
    new, opt = adam_update(params, grads, opt, TrainConfig())
    assert new[0].dtype == np.float32
    assert opt.first_moment[0].dtype == np.float64


def test_repeated_steps_descend_a_quadratic():
    cfg = TrainConfig(learning_rate=0.05)
    params = [np.array([2.0, -3.0])]
    opt = OptimizerState.zeros_like(params)
    for _ in range(200):
        params, opt = adam_update(params, [2.0 * params[0]], opt, cfg)
    assert np.abs(params[0]).max() < 0.1
    assert opt.step == 200


def test_mismatched_lists_are_rejected():
    params = [np.zeros(2)]
    opt = OptimizerState.zeros_like(params)
    with pytest.raises(ShapeMismatchError):
        adam_update(params, [np.zeros(2), np.zeros(2)], opt, TrainConfig())
    with pytest.raises(ShapeMismatchError):
        adam_update(params, [np.zeros(3)], opt, TrainConfig())


def test_zero_gradient_only_decays_the_moments():
    cfg = TrainConfig(adam_beta1=0.9, adam_beta2=0.99)
    params = [np.array([0.5, -2.0])]
    new, opt = adam_update(
        params, [np.zeros(2)], OptimizerState.zeros_like(params), cfg
    )
    np.testing.assert_array_equal(new[0], params[0])

    m, v = np.array([0.2, -0.4]), np.array([0.01, 0.09])
    state = OptimizerState((m,), (v,), step=3)
    _, decayed = adam_update(params, [np.zeros(2)], state, cfg)
    np.testing.assert_array_equal(decayed.first_moment[0], 0.9 * m)
    np.testing.assert_array_equal(decayed.second_moment[0], 0.99 * v)
    assert decayed.step == 4


def test_trajectories_are_bit_identical():
    """Same gradients, same configuration: the same bytes after every step."""

    def run() -> list[bytes]:
        gradients = np.random.default_rng(7)
        params = [np.linspace(-1.0, 1.0, 6).reshape(2, 3)]
        opt = OptimizerState.zeros_like(params)
        trace = []
        for _ in range(50):
            grads = [gradients.standard_normal((2, 3))]
            params, opt = adam_update(params, grads, opt, TrainConfig())
            trace.append(params[0].tobytes() + opt.second_moment[0].tobytes())
        return trace

    assert run() == run()
