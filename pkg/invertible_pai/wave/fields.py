"""Pressure volumes and receiver traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from invertible_pai.core.exceptions import NonFiniteError, ShapeMismatchError
from invertible_pai.wave.grid import ReceiverGeometry, SimGrid


def require_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        message = f"{what} contains non-finite values."
        raise NonFiniteError(message)


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar field on a simulation grid, shape (nx, ny, nz), double precision."""

    grid: SimGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            message = (
                f"Volume shape {values.shape} does not match grid {self.grid.shape}."
            )
            raise ShapeMismatchError(message)
        require_finite(values, "Volume")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: SimGrid) -> Volume:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_spatial(cls, grid: SimGrid, values: np.ndarray) -> Volume:
        return cls(grid, grid.from_spatial(np.asarray(values, dtype=np.float64)))

    def spatial(self) -> np.ndarray:
        return self.grid.to_spatial(self.values)

    def __add__(self, other: Volume) -> Volume:
        return Volume(self.grid, self.values + other.values)

    def __sub__(self, other: Volume) -> Volume:
        return Volume(self.grid, self.values - other.values)

    def __neg__(self) -> Volume:
        return Volume(self.grid, -self.values)

    def scaled(self, factor: float) -> Volume:
        return Volume(self.grid, factor * self.values)


@dataclass(frozen=True, eq=False)
class Traces:
    """Receiver time series, shape (n_active_receivers, nt)."""

    geometry: ReceiverGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        rows = self.geometry.n_active
        if values.ndim != 2 or values.shape[0] != rows:  # noqa: PLR2004
            message = (
                f"Traces shape {values.shape} does not match "
                f"{rows} active receivers."
            )
            raise ShapeMismatchError(message)
        require_finite(values, "Traces")
        object.__setattr__(self, "values", values)

    @property
    def nt(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def zeros(cls, geometry: ReceiverGeometry, nt: int) -> Traces:
        return cls(geometry, np.zeros((geometry.n_active, nt)))

    def __sub__(self, other: Traces) -> Traces:
        return Traces(self.geometry, self.values - other.values)


def subsample_traces(traces: Traces, geometry: ReceiverGeometry) -> Traces:
    """Keep the rows of `traces` whose receivers are active in `geometry`."""
    source = traces.geometry
    if source.mask.shape != geometry.mask.shape or source.plane != geometry.plane:
        message = "Target geometry does not lie on the recorded receiver plane."
        raise ShapeMismatchError(message)
    row_of = np.full(source.mask.shape, -1, dtype=np.int64)
    row_of[source.mask] = np.arange(source.n_active)
    rows = row_of[geometry.mask]
    if np.any(rows < 0):
        message = "Target geometry selects receivers that were not recorded."
        raise ShapeMismatchError(message)
    return Traces(geometry, traces.values[rows])


__all__ = ["Traces", "Volume", "require_finite", "subsample_traces"]
