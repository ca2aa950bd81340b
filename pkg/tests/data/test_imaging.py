"""Tests for slices, projections and PGM export."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.core.exceptions import DataIntegrityError, GeometryError
from invertible_pai.data.imaging import (
    Axis,
    Normalization,
    export_pgm,
    mip,
    quantize,
    read_pgm,
    slice_image,
)
from invertible_pai.wave.fields import Volume
from invertible_pai.wave.grid import SimGrid


def test_fixed_normalization_rounds_half_up():
    image = np.array([[0.0, 1.0], [0.5, 1.0]])
    samples, description = quantize(image, Normalization.fixed(1.0))
    assert samples.tolist() == [[0, 65535], [32768, 65535]]
    assert description == "normalization=fixed peak=1.0"


def test_fixed_normalization_clips():
    samples, _ = quantize(np.array([[-1.0, 3.0]]), Normalization.fixed(2.0))
    assert samples.tolist() == [[0, 65535]]


def test_constant_image_under_minmax_is_black():
    samples, _ = quantize(np.full((3, 3), 7.0), Normalization.minmax())
    assert not samples.any()


def test_minmax_spans_the_full_range():
    image = np.array([[-2.0, 0.0, 2.0]])
    samples, description = quantize(image, Normalization.minmax())
    assert samples.tolist() == [[0, 32768, 65535]]
    assert description.startswith("normalization=minmax")


def test_fixed_peak_must_be_positive():
    with pytest.raises(ValueError, match="positive"):
        Normalization.fixed(0.0)


def test_pgm_round_trip_and_sidecar(tmp_path, rng):
    image = rng.uniform(0.0, 1.0, size=(5, 7))
    path = export_pgm(image, tmp_path / "image.pgm", Normalization.fixed(1.0))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n7 5\n65535\n")
    expected, description = quantize(image, Normalization.fixed(1.0))
    np.testing.assert_array_equal(read_pgm(path), expected)
    sidecar = (tmp_path / "image.pgm.txt").read_text()
    assert sidecar == f"{description}\n"


def test_truncated_pgm_is_rejected(tmp_path):
    path = tmp_path / "broken.pgm"
    path.write_bytes(b"P5\n4 4\n65535\n\x00\x01")
    with pytest.raises(DataIntegrityError):
        read_pgm(path)


def test_projections_and_slices():
    grid = SimGrid(nx=12, ny=12, nz=12, sponge_width=2, nt=8)
    values = np.zeros(grid.shape)
    values[3, 4, 5] = 2.0
    values[3, 7, 5] = 1.0
    volume = Volume(grid, values)
    projected = mip(volume, Axis.Y)
    assert projected.shape == (12, 12)
    assert projected[3, 5] == 2.0
    assert projected.sum() == 2.0
    np.testing.assert_array_equal(slice_image(volume, Axis.Y, 7), values[:, 7, :])
    assert mip(volume, Axis.Z).shape == (12, 12)
    with pytest.raises(GeometryError):
        slice_image(volume, Axis.X, 12)


def test_two_dimensional_projection_is_the_image(small_grid, rng):
    volume = Volume(small_grid, rng.standard_normal(small_grid.shape))
    np.testing.assert_array_equal(mip(volume, Axis.Y), volume.values[:, 0, :])


@pytest.mark.parametrize("axis", list(Axis))
def test_projection_dominates_the_central_slice(axis, rng):
    grid = SimGrid(nx=12, ny=10, nz=14, sponge_width=2, nt=8)
    for _ in range(5):
        volume = Volume(grid, rng.standard_normal(grid.shape))
        centre = grid.shape[axis.index] // 2
        assert np.all(mip(volume, axis) >= slice_image(volume, axis, centre))


@pytest.mark.parametrize("axis", list(Axis))
def test_constant_volume_projects_to_a_constant_image(axis):
    grid = SimGrid(nx=12, ny=12, nz=12, sponge_width=2, nt=8)
    volume = Volume(grid, np.full(grid.shape, 0.375))
    projected = mip(volume, axis)
    assert projected.shape == (12, 12)
    assert np.all(projected == 0.375)
