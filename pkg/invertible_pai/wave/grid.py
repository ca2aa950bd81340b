"""Simulation grid and receiver geometry for the wave operator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from invertible_pai.core.exceptions import GeometryError

# Tolerance on the CFL bound so that c*dt/dx == 1/sqrt(d) is accepted.
_CFL_SLACK = 1e-12


class SimGrid(BaseModel):
    """Regular grid, time stepping and boundary sponge defining the operator.

    The z axis is depth; receivers sit on the top plane just inside the
    sponge. ``ny == 1`` selects the two-dimensional (x, z) kernels.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    nx: int = Field(64, gt=0, description="Grid points along x.")
    ny: int = Field(1, gt=0, description="Grid points along y; 1 selects 2D.")
    nz: int = Field(64, gt=0, description="Grid points along z (depth).")
    dx: float = Field(1e-4, gt=0, description="Grid spacing in meters.")
    dt: float = Field(3e-8, gt=0, description="Time step in seconds.")
    nt: int = Field(128, gt=0, description="Number of recorded time samples.")
    c: float = Field(1500.0, gt=0, description="Sound speed in meters/second.")
    sponge_width: int = Field(8, ge=0, description="Sponge thickness in cells.")
    sponge_strength: float = Field(
        0.05, ge=0, lt=1, description="Damping at the outermost sponge cell."
    )

    @model_validator(mode="after")
    def validate_discretization(self) -> Self:
        """Reject unstable time steps and grids without an interior."""
        limit = 1.0 / math.sqrt(self.ndim)
        if self.courant > limit * (1.0 + _CFL_SLACK):
            message = (
                f"CFL condition violated: c*dt/dx = {self.courant:.6g} exceeds "
                f"1/sqrt({self.ndim}) = {limit:.6g}."
            )
            raise ValueError(message)
        minimum = 2 * self.sponge_width + 4
        for name, size in zip(self.axis_names, self.spatial_shape, strict=True):
            if size < minimum:
                message = (
                    f"Grid axis '{name}' has {size} points; at least {minimum} "
                    f"are needed for sponge_width={self.sponge_width}."
                )
                raise ValueError(message)
        return self

    @property
    def is_2d(self) -> bool:
        return self.ny == 1

    @property
    def ndim(self) -> int:
        return 2 if self.is_2d else 3

    @property
    def courant(self) -> float:
        return self.c * self.dt / self.dx

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        """Shape of the propagated field: (nx, nz) in 2D, (nx, ny, nz) in 3D."""
        if self.is_2d:
            return (self.nx, self.nz)
        return (self.nx, self.ny, self.nz)

    @property
    def axis_names(self) -> tuple[str, ...]:
        return ("nx", "nz") if self.is_2d else ("nx", "ny", "nz")

    @property
    def receiver_plane(self) -> int:
        """Depth index of the first interior plane below the top sponge."""
        return self.sponge_width

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    def to_spatial(self, values: np.ndarray) -> np.ndarray:
        """View a (nx, ny, nz) array in the propagation layout."""
        return values[:, 0, :] if self.is_2d else values

    def from_spatial(self, values: np.ndarray) -> np.ndarray:
        """View a propagation-layout array as (nx, ny, nz)."""
        return values[:, np.newaxis, :] if self.is_2d else values


def _axis_taper(size: int, width: int, strength: float) -> np.ndarray:
    taper = np.ones(size)
    for k in range(width):
        value = 1.0 - strength * math.cos(0.5 * math.pi * k / width) ** 2
        taper[k] = value
        taper[size - 1 - k] = value
    return taper


@lru_cache(maxsize=32)
def sponge_profile(grid: SimGrid) -> np.ndarray:
    """Multiplicative damping field in the propagation layout.

    Each axis contributes a cosine taper that equals ``1 - sponge_strength``
    at the outermost cell and 1 in the interior; the field is their product.
    """
    profile = np.ones(grid.spatial_shape)
    for axis, size in enumerate(grid.spatial_shape):
        taper = _axis_taper(size, grid.sponge_width, grid.sponge_strength)
        shape = [1] * len(grid.spatial_shape)
        shape[axis] = size
        profile = profile * taper.reshape(shape)
    profile.setflags(write=False)
    return profile


class SubsampleScheme(str, Enum):
    """How a receiver subsampling factor is spread over the lateral axes."""

    TOTAL = "total"
    PER_AXIS = "per_axis"


@dataclass(frozen=True, eq=False)
class ReceiverGeometry:
    """Active receivers on the top interior plane of a grid."""

    mask: np.ndarray
    plane: int
    subsample_factor: int = 1
    scheme: SubsampleScheme = SubsampleScheme.TOTAL
    active_indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:  # noqa: PLR2004
            message = f"Receiver mask must be 2D (nx, ny); got shape {mask.shape}."
            raise GeometryError(message)
        if not mask.any():
            message = "Receiver mask has no active receivers."
            raise GeometryError(message)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "active_indices", np.flatnonzero(mask))

    @property
    def n_active(self) -> int:
        return int(self.active_indices.size)

    def matches(self, other: ReceiverGeometry) -> bool:
        return (
            self.plane == other.plane
            and self.mask.shape == other.mask.shape
            and bool(np.array_equal(self.mask, other.mask))
        )

    def fits(self, grid: SimGrid) -> bool:
        return self.mask.shape == (grid.nx, grid.ny) and 0 <= self.plane < grid.nz

    def lateral_mask(self, grid: SimGrid) -> np.ndarray:
        """Mask in the propagation layout of the receiver plane."""
        return self.mask[:, 0] if grid.is_2d else self.mask


def make_full_geometry(grid: SimGrid) -> ReceiverGeometry:
    """Every point of the receiver plane is active."""
    return ReceiverGeometry(
        mask=np.ones((grid.nx, grid.ny), dtype=bool),
        plane=grid.receiver_plane,
    )


def _balanced_split(factor: int) -> tuple[int, int]:
    """Two strides whose product is `factor`, as close to each other as possible."""
    inner = math.isqrt(factor)
    while factor % inner:
        inner -= 1
    return factor // inner, inner


def lateral_strides(
    grid: SimGrid, factor: int, scheme: SubsampleScheme
) -> tuple[int, ...]:
    """Decimation stride along each lateral axis for a subsampling factor.

    ``TOTAL`` splits ``factor`` over the lateral axes so the product of the
    strides is exactly ``factor``; a prime factor lands on x alone.
    """
    if factor < 1:
        message = f"Subsample factor must be >= 1; got {factor}."
        raise GeometryError(message)
    lateral = (grid.nx,) if grid.is_2d else (grid.nx, grid.ny)
    if scheme is SubsampleScheme.PER_AXIS:
        strides = (factor,) * len(lateral)
    elif grid.is_2d:
        strides = (factor,)
    else:
        strides = _balanced_split(factor)
    if any(stride > extent for stride, extent in zip(strides, lateral, strict=True)):
        message = (
            f"Subsample factor {factor} ({scheme.value}) needs strides {strides}, "
            f"larger than the receiver plane extent {lateral}."
        )
        raise GeometryError(message)
    return strides


def make_subsampled_geometry(
    grid: SimGrid,
    factor: int,
    scheme: SubsampleScheme = SubsampleScheme.TOTAL,
) -> ReceiverGeometry:
    """Keep a regular lattice of receivers on the top plane.

    ``TOTAL`` divides the receiver count by ``factor`` (see `lateral_strides`);
    ``PER_AXIS`` applies stride ``factor`` along every lateral axis.
    """
    scheme = SubsampleScheme(scheme)
    strides = lateral_strides(grid, factor, scheme)
    mask = np.zeros((grid.nx, grid.ny), dtype=bool)
    if grid.is_2d:
        mask[:: strides[0], :] = True
    else:
        mask[:: strides[0], :: strides[1]] = True
    return ReceiverGeometry(
        mask=mask,
        plane=grid.receiver_plane,
        subsample_factor=factor,
        scheme=scheme,
    )


__all__ = [
    "ReceiverGeometry",
    "SimGrid",
    "SubsampleScheme",
    "lateral_strides",
    "make_full_geometry",
    "make_subsampled_geometry",
    "sponge_profile",
]
