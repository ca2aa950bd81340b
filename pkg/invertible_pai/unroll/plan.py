"""Loop-unrolled reconstruction: physics gradient, then a learned invertible update.

Each iteration computes g_i = A^T (A x_i - y) and lets stage i map
(x_i, s_i) to (x_{i+1}, s_{i+1}) with g_i as conditioning. The physics runs in
double precision; the network runs in the architecture's dtype and the
conversion happens here, at the boundary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import structlog

from invertible_pai.core.exceptions import ConfigurationError, ShapeMismatchError
from invertible_pai.inn.stage import (
    ArchitectureSpec,
    InnState,
    StageParams,
    init_params,
    stage_forward,
)
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.operator import SolveTally, WaveOperator

log = structlog.get_logger(__name__)


class InitPolicy(str, Enum):
    ZEROS = "zeros"


@dataclass(frozen=True, eq=False)
class ReconstructionPlan:
    """Trained stages theta_0 .. theta_{K-1} and their gradient scales."""

    stages: tuple[StageParams, ...]
    stage_scales: tuple[float, ...] = ()
    x0_policy: InitPolicy = InitPolicy.ZEROS
    s0_policy: InitPolicy = InitPolicy.ZEROS

    def __post_init__(self) -> None:
        if not self.stages:
            message = "A reconstruction plan needs at least one stage."
            raise ConfigurationError(message)
        if not self.stage_scales:
            object.__setattr__(self, "stage_scales", (1.0,) * len(self.stages))
        if len(self.stage_scales) != len(self.stages):
            message = (
                f"{len(self.stage_scales)} gradient scales given for "
                f"{len(self.stages)} stages."
            )
            raise ConfigurationError(message)
        if any(not scale > 0 for scale in self.stage_scales):
            message = "Gradient scales must be positive."
            raise ConfigurationError(message)
        layout = {(stage.spec.n_channels, stage.spec.ndim) for stage in self.stages}
        if len(layout) != 1:
            message = "All stages must share the state channel layout."
            raise ShapeMismatchError(message)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def spec(self) -> ArchitectureSpec:
        return self.stages[0].spec

    @classmethod
    def identity(
        cls, spec: ArchitectureSpec, n_stages: int, seed: int = 0
    ) -> ReconstructionPlan:
        """Freshly initialized stages; each one is the identity map."""
        return cls(tuple(init_params(spec, seed + index) for index in range(n_stages)))

    def initial_state(self, operator: WaveOperator) -> tuple[Volume, np.ndarray]:
        grid = operator.grid
        memory = np.zeros(
            (self.spec.n_channels - 1, *grid.spatial_shape), dtype=self.spec.dtype
        )
        return Volume.zeros(grid), memory


@dataclass(frozen=True, eq=False)
class StepOutput:
    x: Volume
    s: np.ndarray
    misfit: float
    gradient: Volume
    network_seconds: float


def network_state(x: Volume, s: np.ndarray, spec: ArchitectureSpec) -> InnState:
    return InnState(x.spatial()[np.newaxis].astype(spec.numpy_dtype), s)


def conditioning(gradient: Volume, scale: float, spec: ArchitectureSpec) -> np.ndarray:
    return (scale * gradient.spatial()[np.newaxis]).astype(spec.numpy_dtype)


def apply_stage(
    x: Volume,
    s: np.ndarray,
    gradient: Volume,
    stage: StageParams,
    scale: float = 1.0,
) -> tuple[Volume, np.ndarray, float]:
    """Run one stage on a precomputed gradient; no PDE solves."""
    spec = stage.spec
    if spec.ndim != x.grid.ndim:
        message = f"Stage is {spec.ndim}D but the grid is {x.grid.ndim}D."
        raise ShapeMismatchError(message)
    start = time.perf_counter()
    out = stage_forward(
        network_state(x, s, spec), conditioning(gradient, scale, spec), stage
    )
    seconds = time.perf_counter() - start
    x_next = Volume.from_spatial(x.grid, out.x_part[0].astype(np.float64))
    return x_next, out.s_part, seconds


def unrolled_step(
    x_i: Volume,
    s_i: np.ndarray,
    y_obs: Traces,
    stage: StageParams,
    operator: WaveOperator,
    scale: float = 1.0,
) -> StepOutput:
    """x_{i+1}, s_{i+1} from stage i conditioned on the misfit gradient at x_i.

    Costs exactly one forward and one adjoint solve.
    """
    misfit, gradient = operator.misfit_and_gradient(x_i, y_obs)
    x_next, s_next, seconds = apply_stage(x_i, s_i, gradient, stage, scale)
    return StepOutput(x_next, s_next, misfit, gradient, seconds)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    volume: Volume
    misfits: list[float] = field(default_factory=list)
    solves: SolveTally = field(default_factory=lambda: SolveTally(0, 0))
    pde_seconds: float = 0.0
    network_seconds: float = 0.0
    first_gradient: Volume | None = None


def reconstruct(
    y_obs: Traces, plan: ReconstructionPlan, operator: WaveOperator
) -> ReconstructionResult:
    """Apply all K stages from x_0 = 0, s_0 = 0; consumes exactly 2K solves."""
    counter = operator.counter.child()
    local = operator.with_counter(counter)
    x, s = plan.initial_state(local)
    misfits: list[float] = []
    network_seconds = 0.0
    first_gradient: Volume | None = None
    for index, (stage, scale) in enumerate(
        zip(plan.stages, plan.stage_scales, strict=True)
    ):
        step = unrolled_step(x, s, y_obs, stage, local, scale)
        x, s = step.x, step.s
        misfits.append(step.misfit)
        network_seconds += step.network_seconds
        if first_gradient is None:
            first_gradient = step.gradient
        log.info("unroll.stage_applied", stage=index, misfit=step.misfit)
    solves = counter.snapshot()
    log.info(
        "unroll.reconstructed",
        stages=plan.n_stages,
        pde_solves=solves.total,
        pde_seconds=counter.seconds,
        network_seconds=network_seconds,
    )
    return ReconstructionResult(
        volume=x,
        misfits=misfits,
        solves=solves,
        pde_seconds=counter.seconds,
        network_seconds=network_seconds,
        first_gradient=first_gradient,
    )


__all__ = [
    "InitPolicy",
    "ReconstructionPlan",
    "ReconstructionResult",
    "StepOutput",
    "apply_stage",
    "conditioning",
    "network_state",
    "reconstruct",
    "unrolled_step",
]
