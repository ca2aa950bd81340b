"""Tests for procedural vessel phantoms."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from invertible_pai.core.exceptions import GeometryError
from invertible_pai.data.phantom import PhantomSpec, gen_phantom
from invertible_pai.wave.grid import SimGrid


def test_phantom_is_bounded_and_non_negative(small_grid):
    volume = gen_phantom(small_grid, PhantomSpec(seed=3))
    assert volume.values.shape == small_grid.shape
    assert volume.values.min() >= 0.0
    assert volume.values.max() <= 1.0
    assert volume.values.max() > 0.0


def test_same_seed_same_phantom(small_grid):
    first = gen_phantom(small_grid, PhantomSpec(seed=42))
    second = gen_phantom(small_grid, PhantomSpec(seed=42))
    other = gen_phantom(small_grid, PhantomSpec(seed=43))
    assert first.values.tobytes() == second.values.tobytes()
    assert first.values.tobytes() != other.values.tobytes()


def test_no_vessels_is_empty(small_grid):
    volume = gen_phantom(small_grid, PhantomSpec(n_vessels=0))
    assert not volume.values.any()


def test_sponge_layer_stays_empty():
    """Vessels are stamped only inside the undamped interior."""
    grid = SimGrid(nx=24, nz=24, sponge_width=4)
    for seed in range(5):
        field = gen_phantom(grid, PhantomSpec(n_vessels=3, seed=seed)).spatial()
        assert not field[:4].any()
        assert not field[-4:].any()
        assert not field[:, :4].any()
        assert not field[:, -4:].any()


@pytest.mark.parametrize("seed", range(20))
def test_default_phantoms_are_sparse(seed):
    """Tubes fill part of the image and leave an exactly zero background."""
    spec = PhantomSpec(seed=seed)
    volume = gen_phantom(SimGrid(), spec)
    fraction = np.count_nonzero(volume.values) / volume.values.size
    assert 0.0 < fraction < 0.5
    low, high = spec.intensity_range
    assert low <= volume.values.max() <= high
    assert volume.values.min() >= 0.0


def test_fill_limit_stops_the_walks():
    """A tight fill limit overshoots by at most one blob."""
    grid = SimGrid()
    spec = PhantomSpec(n_vessels=4, max_branches=10, branch_prob=0.1, max_fill=0.05)
    volume = gen_phantom(grid, spec)
    blob = (2 * 3 + 1) ** 2
    assert 0 < np.count_nonzero(volume.values) <= 0.05 * volume.values.size + blob


def test_grid_too_small_for_the_vessels():
    grid = SimGrid(nx=8, nz=8, sponge_width=2)
    with pytest.raises(GeometryError, match="too small"):
        gen_phantom(grid, PhantomSpec())


def test_three_dimensional_phantom():
    grid = SimGrid(nx=12, ny=12, nz=12, sponge_width=2, nt=8)
    volume = gen_phantom(grid, PhantomSpec(seed=1))
    assert volume.values.shape == (12, 12, 12)
    assert volume.values.max() > 0.0


@pytest.mark.parametrize(
    "overrides",
    [{"radius_range": (2.0, 1.0)}, {"intensity_range": (0.0, 1.0)}, {"n_vessels": -1}],
)
def test_invalid_phantom_spec(overrides):
    with pytest.raises(ValidationError):
        PhantomSpec(**overrides)
