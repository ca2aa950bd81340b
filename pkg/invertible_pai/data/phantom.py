"""Procedural vessel phantoms: seeded random-walk branching tubes."""

from __future__ import annotations

import math
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from invertible_pai.core.exceptions import GeometryError
from invertible_pai.wave.fields import Volume
from invertible_pai.wave.grid import SimGrid

_UINT64_LIMIT = 2**64
# Gaussian cross-sections are cut off at this many radii.
_TRUNCATION = 2.0
_BRANCH_RADIUS_DECAY = 0.8


class PhantomSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_vessels: int = Field(2, ge=0, description="Root vessels per phantom.")
    radius_range: tuple[float, float] = Field(
        (0.7, 1.5), description="Tube radius range in cells."
    )
    curvature: float = Field(0.3, ge=0, description="Random-walk turning scale.")
    step_length: float = Field(1.0, gt=0, description="Walk step in cells.")
    branch_prob: float = Field(0.02, ge=0, le=1, description="Branching per step.")
    max_branches: int = Field(3, ge=0, description="Branches spawned per vessel.")
    intensity_range: tuple[float, float] = Field(
        (0.5, 1.0), description="Initial pressure amplitude range."
    )
    max_fill: float = Field(
        0.25, gt=0, le=1, description="Walks stop once this voxel fraction is filled."
    )
    seed: int = Field(0, ge=0, lt=_UINT64_LIMIT)

    @model_validator(mode="after")
    def validate_ranges(self) -> Self:
        low, high = self.radius_range
        if not 0 < low <= high:
            message = (
                f"radius_range must satisfy 0 < min <= max; got {self.radius_range}."
            )
            raise ValueError(message)
        low, high = self.intensity_range
        if not 0 < low <= high:
            message = (
                f"intensity_range must satisfy 0 < min <= max; got "
                f"{self.intensity_range}."
            )
            raise ValueError(message)
        return self

    def with_seed(self, seed: int) -> PhantomSpec:
        return self.model_copy(update={"seed": seed % _UINT64_LIMIT})


def _interior(grid: SimGrid) -> tuple[np.ndarray, np.ndarray]:
    width = grid.sponge_width
    low = np.full(grid.ndim, float(width))
    high = np.array([n - width - 1 for n in grid.spatial_shape], dtype=np.float64)
    return low, high


def _random_direction(rng: np.random.Generator, ndim: int) -> np.ndarray:
    direction = rng.standard_normal(ndim)
    norm = float(np.linalg.norm(direction))
    return direction / norm if norm > 0 else np.eye(ndim)[0]


def _stamp(
    field: np.ndarray,
    centre: np.ndarray,
    radius: float,
    intensity: float,
    low: np.ndarray,
    high: np.ndarray,
) -> int:
    """Max-combine a truncated Gaussian blob at the voxel nearest `centre`.

    Returns how many voxels went from zero to nonzero.
    """
    voxel = np.rint(centre).astype(int)
    reach = math.ceil(_TRUNCATION * radius)
    window = []
    offsets = []
    for axis, index in enumerate(voxel):
        start = max(int(low[axis]), index - reach)
        stop = min(int(high[axis]), index + reach) + 1
        window.append(slice(start, stop))
        offsets.append(np.arange(start, stop) - index)
    mesh = np.meshgrid(*offsets, indexing="ij")
    distance2 = sum(offset.astype(np.float64) ** 2 for offset in mesh)
    blob = intensity * np.exp(-distance2 / (2.0 * radius * radius))
    blob[distance2 > (_TRUNCATION * radius) ** 2] = 0.0
    region = field[tuple(window)]
    before = np.count_nonzero(region)
    np.maximum(region, blob, out=region)
    return int(np.count_nonzero(region)) - int(before)


def gen_phantom(grid: SimGrid, spec: PhantomSpec) -> Volume:
    """Render `spec.n_vessels` branching tubes inside the sponge-free interior.

    Cross-sections are Gaussian, truncated at two radii, so the background is
    exactly zero. Walking stops once `spec.max_fill` of the voxels are nonzero;
    the overshoot is at most one blob. Deterministic per seed.
    """
    low, high = _interior(grid)
    needed = 2 * math.ceil(_TRUNCATION * spec.radius_range[1]) + 1
    extents = high - low + 1
    if np.any(extents < needed):
        message = (
            f"Grid interior {tuple(int(e) for e in extents)} is too small for "
            f"vessels of radius {spec.radius_range[1]}; need {needed} cells per axis."
        )
        raise GeometryError(message)
    field = np.zeros(grid.spatial_shape)
    rng = np.random.default_rng(spec.seed)
    max_steps = int(4 * extents.max() / spec.step_length)
    fill_limit = spec.max_fill * field.size
    filled = 0
    for _ in range(spec.n_vessels):
        intensity = float(rng.uniform(*spec.intensity_range))
        pending = [
            (
                rng.uniform(low, high),
                _random_direction(rng, grid.ndim),
                float(rng.uniform(*spec.radius_range)),
            )
        ]
        branches = 0
        while pending and filled < fill_limit:
            point, direction, radius = pending.pop()
            for _step in range(max_steps):
                filled += _stamp(field, point, radius, intensity, low, high)
                if filled >= fill_limit:
                    break
                if branches < spec.max_branches and rng.random() < spec.branch_prob:
                    branches += 1
                    pending.append(
                        (
                            point.copy(),
                            _random_direction(rng, grid.ndim),
                            max(spec.radius_range[0], _BRANCH_RADIUS_DECAY * radius),
                        )
                    )
                turned = direction + spec.curvature * rng.standard_normal(grid.ndim)
                direction = turned / max(float(np.linalg.norm(turned)), 1e-12)
                point = point + spec.step_length * direction
                if np.any(point < low) or np.any(point > high):
                    break
    return Volume.from_spatial(grid, field)


__all__ = ["PhantomSpec", "gen_phantom"]
