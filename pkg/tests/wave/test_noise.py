"""Tests for calibrated Gaussian noise and trace subsampling."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.core.exceptions import NoiseError, ShapeMismatchError
from invertible_pai.wave.fields import Traces, subsample_traces
from invertible_pai.wave.grid import make_full_geometry, make_subsampled_geometry
from invertible_pai.wave.noise import NoiseSpec, add_noise, rms


@pytest.fixture
def traces(small_grid, rng) -> Traces:
    geometry = make_full_geometry(small_grid)
    return Traces(geometry, rng.standard_normal((geometry.n_active, small_grid.nt)))


def test_vanishing_noise_limit(traces):
    """A very high SNR leaves the traces unchanged."""
    noisy = add_noise(traces, NoiseSpec(snr_db=300.0, seed=3))
    relative = np.abs(noisy.values - traces.values).max() / np.abs(traces.values).max()
    assert relative < 1e-12


def test_ten_db_calibration_over_many_seeds(traces):
    """The empirical SNR is centred on the requested 10 dB."""
    measured = []
    for seed in range(100):
        noisy = add_noise(traces, NoiseSpec(snr_db=10.0, seed=seed))
        noise = noisy.values - traces.values
        measured.append(20.0 * np.log10(rms(traces.values) / rms(noise)))
    assert float(np.median(measured)) == pytest.approx(10.0, abs=0.3)


def test_same_seed_is_bit_identical(traces):
    """Noise depends only on the seed and the signal."""
    spec = NoiseSpec(snr_db=10.0, seed=42)
    first = add_noise(traces, spec)
    second = add_noise(traces, spec)
    assert first.values.tobytes() == second.values.tobytes()
    other = add_noise(traces, spec.model_copy(update={"seed": 43}))
    assert other.values.tobytes() != first.values.tobytes()


def test_zero_signal_has_no_snr(traces):
    """An all-zero signal cannot be given a relative noise level."""
    silent = Traces(traces.geometry, np.zeros_like(traces.values))
    with pytest.raises(NoiseError):
        add_noise(silent, NoiseSpec())


def test_non_finite_snr_is_rejected():
    """Infinity is not a supported sentinel."""
    with pytest.raises(ValueError, match="finite"):
        NoiseSpec(snr_db=float("inf"))


def test_subsample_keeps_active_rows(small_grid, traces):
    """Subsampled traces are the rows of the active receivers, in order."""
    geometry = make_subsampled_geometry(small_grid, 4)
    kept = subsample_traces(traces, geometry)
    assert kept.values.shape == (geometry.n_active, small_grid.nt)
    np.testing.assert_array_equal(kept.values, traces.values[::4])


def test_subsample_needs_recorded_receivers(small_grid, traces):
    """A geometry asking for unrecorded receivers is rejected."""
    sparse = subsample_traces(traces, make_subsampled_geometry(small_grid, 4))
    with pytest.raises(ShapeMismatchError):
        subsample_traces(sparse, make_full_geometry(small_grid))
