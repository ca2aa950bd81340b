"""Tests for the matrix-free LSQR baseline."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.sparse.linalg import LinearOperator

from invertible_pai.baseline.lsqr import LsqrOptions, lsqr, lsqr_reconstruct
from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.wave.fields import Traces
from invertible_pai.wave.grid import make_full_geometry


def test_zero_data_needs_no_products():
    """b = 0 is answered by x = 0 before any product."""
    calls = []

    def forbidden(_):
        calls.append(1)
        raise AssertionError

    operator = LinearOperator((6, 4), matvec=forbidden, rmatvec=forbidden)
    result = lsqr(operator, np.zeros(6))
    assert result.istop == 0
    assert result.total_solves == 0
    assert not result.x.any()
    assert calls == []


def test_dense_problem_matches_least_squares(rng):
    """On a well-conditioned 20x10 matrix LSQR reaches the lstsq solution."""
    matrix = rng.standard_normal((20, 10))
    b = rng.standard_normal(20)
    result = lsqr(matrix, b, LsqrOptions(max_iters=40, atol=1e-12, btol=1e-12))
    expected, *_ = np.linalg.lstsq(matrix, b, rcond=None)
    assert np.linalg.norm(result.x - expected) / np.linalg.norm(expected) < 1e-8
    assert result.istop in (1, 2)


def test_consistent_system_stops_on_small_residual(rng):
    matrix = rng.standard_normal((12, 6))
    truth = rng.standard_normal(6)
    opts = LsqrOptions(max_iters=50, atol=1e-12, btol=1e-12)
    result = lsqr(matrix, matrix @ truth, opts)
    np.testing.assert_allclose(result.x, truth, rtol=1e-8)
    assert result.residual_history[-1] < 1e-6


def test_wave_baseline_solve_count_and_monotone_residuals(
    small_operator, small_samples
):
    """30 iterations cost 1 + 60 solves and never raise the residual."""
    _, y_obs = small_samples[0]
    opts = LsqrOptions(max_iters=30, atol=0.0, btol=0.0)
    baseline = lsqr_reconstruct(y_obs, small_operator, opts)
    result = baseline.result
    assert result.istop == 3
    assert result.iterations == 30
    assert result.body_solves == 60
    assert result.total_solves == 61
    assert baseline.solves.total == 61
    assert small_operator.counter.total == 61
    assert baseline.volume.grid == small_operator.grid
    history = np.asarray(result.residual_history)
    assert len(history) == 31
    assert history[0] == 1.0
    assert np.all(np.diff(history) <= 1e-12)
    assert history[-1] < 1.0


def test_mismatched_inputs_are_rejected(small_operator, small_grid, rng):
    full = make_full_geometry(small_grid)
    traces = Traces(full, rng.standard_normal((full.n_active, small_grid.nt)))
    with pytest.raises(ShapeMismatchError):
        lsqr_reconstruct(traces, small_operator)
    with pytest.raises(ShapeMismatchError):
        lsqr(np.eye(3), np.ones(4))
