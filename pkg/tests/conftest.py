"""Pytest fixtures for invertible-pai tests."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np
import pytest
import structlog

from invertible_pai.data.phantom import PhantomSpec, gen_phantom
from invertible_pai.inn.stage import ArchitectureSpec
from invertible_pai.observability.logging import reset_structlog_configuration_guard
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.grid import (
    ReceiverGeometry,
    SimGrid,
    make_subsampled_geometry,
)
from invertible_pai.wave.operator import WaveOperator


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test draws the same numbers."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid() -> SimGrid:
    """16x16 2D grid with a thin sponge; fast enough for many solves."""
    return SimGrid(nx=16, ny=1, nz=16, sponge_width=2, nt=24)


@pytest.fixture
def small_geometry(small_grid: SimGrid) -> ReceiverGeometry:
    """Every 4th receiver of the top interior row."""
    return make_subsampled_geometry(small_grid, 4)


@pytest.fixture
def small_operator(
    small_grid: SimGrid, small_geometry: ReceiverGeometry
) -> WaveOperator:
    """Wave operator with its own fresh solve counter."""
    return WaveOperator(small_grid, small_geometry)


@pytest.fixture
def tiny_spec() -> ArchitectureSpec:
    """Two-layer double precision stage without squeezing."""
    return ArchitectureSpec(
        n_channels=4, depth=2, hidden_channels=4, squeeze_plan=(), dtype="float64"
    )


@pytest.fixture
def small_samples(
    small_grid: SimGrid, small_geometry: ReceiverGeometry
) -> list[tuple[Volume, Traces]]:
    """Four noise-free (phantom, traces) pairs on the small grid."""
    operator = WaveOperator(small_grid, small_geometry)
    samples = []
    for seed in range(4):
        truth = gen_phantom(small_grid, PhantomSpec(n_vessels=1, seed=seed))
        samples.append((truth, operator.forward(truth)))
    return samples


@pytest.fixture
def clean_structlog() -> Iterator[None]:
    """Reset the structlog guard before and after a test."""
    reset_structlog_configuration_guard()
    structlog.reset_defaults()
    yield
    reset_structlog_configuration_guard()
    structlog.reset_defaults()
