"""Discrete acoustic wave operator, its exact adjoint and the misfit gradient.

The forward map A takes an initial pressure field x to receiver traces.
Propagation is leapfrog in time with the second order Laplacian (zero outside
the grid) and a multiplicative sponge ``D``:

    p[-1] = p[0] = x
    p[n+1] = D * (2 p[n] - p[n-1] + r2 * lap(p[n]))
    y[n] = R p[n],  n = 0 .. nt-1

with ``r2 = (c dt / dx)**2``. The adjoint runs the transposed recurrence
backwards in time, injecting the traces at the receivers, so that
<A x, y> == <x, A^T y> to rounding.
"""

from __future__ import annotations

import threading
import time
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import structlog
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.observability.metrics import PDE_SOLVE_SECONDS, PDE_SOLVES
from invertible_pai.wave.fields import Traces, Volume, require_finite
from invertible_pai.wave.grid import ReceiverGeometry, SimGrid, sponge_profile

log = structlog.get_logger(__name__)


@dataclass(frozen=True, slots=True)
class SolveTally:
    forward: int
    adjoint: int

    @property
    def total(self) -> int:
        return self.forward + self.adjoint

    def __sub__(self, other: SolveTally) -> SolveTally:
        return SolveTally(self.forward - other.forward, self.adjoint - other.adjoint)


class SolveCounter:
    """Thread-safe, monotonically increasing tally of PDE solves.

    A child counter created with `child` also forwards every solve to its
    parent, so per-sample tallies and the run total stay consistent.
    """

    def __init__(self, parent: SolveCounter | None = None) -> None:
        self._parent = parent
        self._lock = threading.Lock()
        self._forward = 0
        self._adjoint = 0
        self._forward_seconds = 0.0
        self._adjoint_seconds = 0.0

    def child(self) -> SolveCounter:
        return SolveCounter(parent=self)

    def record(self, kind: str, seconds: float = 0.0) -> None:
        counter: SolveCounter | None = self
        while counter is not None:
            counter._tally(kind, seconds)  # noqa: SLF001
            counter = counter._parent  # noqa: SLF001
        PDE_SOLVES.labels(kind=kind).inc()
        PDE_SOLVE_SECONDS.labels(kind=kind).observe(seconds)

    def _tally(self, kind: str, seconds: float) -> None:
        with self._lock:
            if kind == "forward":
                self._forward += 1
                self._forward_seconds += seconds
            elif kind == "adjoint":
                self._adjoint += 1
                self._adjoint_seconds += seconds
            else:
                message = f"Unknown solve kind '{kind}'."
                raise ValueError(message)

    @property
    def forward_count(self) -> int:
        return self._forward

    @property
    def adjoint_count(self) -> int:
        return self._adjoint

    @property
    def total(self) -> int:
        return self._forward + self._adjoint

    @property
    def seconds(self) -> float:
        return self._forward_seconds + self._adjoint_seconds

    def snapshot(self) -> SolveTally:
        with self._lock:
            return SolveTally(self._forward, self._adjoint)


def _laplacian(field: np.ndarray) -> np.ndarray:
    return ndimage.laplace(field, mode="constant", cval=0.0)


class WaveOperator:
    """Forward/adjoint pair for one grid and receiver geometry.

    All calls through one operator share its SolveCounter, so the cost of any
    algorithm built on top can be audited exactly.
    """

    def __init__(
        self,
        grid: SimGrid,
        geometry: ReceiverGeometry,
        counter: SolveCounter | None = None,
    ) -> None:
        if not geometry.fits(grid):
            message = (
                f"Receiver geometry (mask {geometry.mask.shape}, plane "
                f"{geometry.plane}) does not fit grid {grid.shape}."
            )
            raise ShapeMismatchError(message)
        self.grid = grid
        self.geometry = geometry
        self.counter = counter or SolveCounter()
        self._damping = sponge_profile(grid)
        self._r2 = grid.courant**2
        self._lateral_mask = geometry.lateral_mask(grid)

    def with_counter(self, counter: SolveCounter) -> WaveOperator:
        """Same operator, solves tallied on `counter`."""
        return WaveOperator(self.grid, self.geometry, counter)

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) of A as a matrix on flattened arrays."""
        return (self.geometry.n_active * self.grid.nt, self.grid.n_voxels)

    def _record(self, field: np.ndarray) -> np.ndarray:
        return field[..., self.geometry.plane][self._lateral_mask]

    def _propagate(self, initial: np.ndarray) -> Iterator[np.ndarray]:
        """Yield the pressure field at steps 0 .. nt-1, starting at rest."""
        damping, r2 = self._damping, self._r2
        current = initial.copy()
        previous = current.copy()
        yield current
        for _ in range(1, self.grid.nt):
            following = damping * (2.0 * current - previous + r2 * _laplacian(current))
            previous, current = current, following
            yield current

    def wavefield_peaks(self, x: Volume) -> np.ndarray:
        """Max |p| over the grid at every time step; counted as a forward solve."""
        if x.grid != self.grid:
            message = "Volume grid does not match the operator grid."
            raise ShapeMismatchError(message)
        start = time.perf_counter()
        fields = self._propagate(x.spatial())
        peaks = np.array([np.abs(field).max() for field in fields])
        self.counter.record("forward", time.perf_counter() - start)
        return peaks

    def forward(self, x: Volume) -> Traces:
        """Apply A: propagate ``x`` and record it at the active receivers."""
        if x.grid != self.grid:
            message = "Volume grid does not match the operator grid."
            raise ShapeMismatchError(message)
        require_finite(x.values, "Volume")
        start = time.perf_counter()
        traces = np.empty((self.geometry.n_active, self.grid.nt))
        for step, field in enumerate(self._propagate(x.spatial())):
            traces[:, step] = self._record(field)
        seconds = time.perf_counter() - start
        self.counter.record("forward", seconds)
        log.debug("wave.forward", nt=self.grid.nt, seconds=seconds)
        return Traces(self.geometry, traces)

    def adjoint(self, y: Traces) -> Volume:
        """Apply A^T: backward recurrence with traces injected at receivers."""
        if not y.geometry.matches(self.geometry):
            message = "Traces geometry does not match the operator geometry."
            raise ShapeMismatchError(message)
        if y.nt != self.grid.nt:
            message = f"Traces have {y.nt} samples; the grid records {self.grid.nt}."
            raise ShapeMismatchError(message)
        require_finite(y.values, "Traces")
        start = time.perf_counter()
        damping, r2 = self._damping, self._r2
        plane = self.geometry.plane
        shape = self.grid.spatial_shape
        # lam_next holds lambda[n+1], lam_next2 holds lambda[n+2].
        lam_next = np.zeros(shape)
        lam_next2 = np.zeros(shape)
        for step in range(self.grid.nt - 1, -1, -1):
            damped = damping * lam_next
            lam = 2.0 * damped + r2 * _laplacian(damped) - damping * lam_next2
            lam[..., plane][self._lateral_mask] += y.values[:, step]
            lam_next2, lam_next = lam_next, lam
        # p[-1] = x feeds p[1] through -D p[-1].
        gradient = lam_next - damping * lam_next2
        seconds = time.perf_counter() - start
        self.counter.record("adjoint", seconds)
        log.debug("wave.adjoint", nt=self.grid.nt, seconds=seconds)
        return Volume.from_spatial(self.grid, gradient)

    def misfit_and_gradient(self, x: Volume, y_obs: Traces) -> tuple[float, Volume]:
        """Return (1/2 ||A x - y||^2, A^T (A x - y)) using one solve of each kind."""
        residual = self.forward(x) - y_obs
        misfit = 0.5 * float(np.sum(residual.values**2))
        return misfit, self.adjoint(residual)

    def misfit_gradient(self, x: Volume, y_obs: Traces) -> Volume:
        return self.misfit_and_gradient(x, y_obs)[1]

    def as_linear_operator(self) -> LinearOperator:
        """Expose A on flattened arrays; every product is a counted PDE solve."""
        grid, geometry = self.grid, self.geometry

        def matvec(vector: np.ndarray) -> np.ndarray:
            volume = Volume(grid, np.reshape(vector, grid.shape))
            return self.forward(volume).values.ravel()

        def rmatvec(vector: np.ndarray) -> np.ndarray:
            traces = Traces(geometry, np.reshape(vector, (geometry.n_active, grid.nt)))
            return self.adjoint(traces).values.ravel()

        return LinearOperator(
            shape=self.shape, matvec=matvec, rmatvec=rmatvec, dtype=np.float64
        )


def forward(
    x: Volume,
    geom: ReceiverGeometry,
    grid: SimGrid,
    counter: SolveCounter | None = None,
) -> Traces:
    return WaveOperator(grid, geom, counter).forward(x)


def adjoint(y: Traces, grid: SimGrid, counter: SolveCounter | None = None) -> Volume:
    return WaveOperator(grid, y.geometry, counter).adjoint(y)


def misfit_gradient(
    x: Volume, y_obs: Traces, grid: SimGrid, counter: SolveCounter | None = None
) -> Volume:
    return WaveOperator(grid, y_obs.geometry, counter).misfit_gradient(x, y_obs)


__all__ = [
    "SolveCounter",
    "SolveTally",
    "WaveOperator",
    "adjoint",
    "forward",
    "misfit_gradient",
]
