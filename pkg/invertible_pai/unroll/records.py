"""Pre-generated per-stage training samples.

All PDE solves of greedy training happen here: every sample is rolled through
the frozen earlier stages and the misfit gradient at the resulting estimate is
stored, so the optimization loop itself never touches the wave operator.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import structlog

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.unroll.plan import ReconstructionPlan, unrolled_step
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.operator import SolveTally, WaveOperator

log = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """Input of stage `stage_index` for one sample, plus its target."""

    ground_truth: Volume
    x: Volume
    s: np.ndarray
    gradient: Volume
    sample_id: int
    stage_index: int
    solves: SolveTally

    def __post_init__(self) -> None:
        grid = self.ground_truth.grid
        if self.x.grid != grid or self.gradient.grid != grid:
            message = f"Sample {self.sample_id} mixes volumes from different grids."
            raise ShapeMismatchError(message)
        if self.s.shape[1:] != grid.spatial_shape:
            message = (
                f"Memory of sample {self.sample_id} has spatial shape "
                f"{self.s.shape[1:]}; expected {grid.spatial_shape}."
            )
            raise ShapeMismatchError(message)


def _build_record(
    sample_id: int,
    ground_truth: Volume,
    y_obs: Traces,
    frozen: ReconstructionPlan | None,
    stage_index: int,
    operator: WaveOperator,
    memory_channels: int,
    dtype: np.dtype,
) -> SampleRecord:
    counter = operator.counter.child()
    local = operator.with_counter(counter)
    x = Volume.zeros(local.grid)
    s = np.zeros((memory_channels, *local.grid.spatial_shape), dtype=dtype)
    if frozen is not None:
        for stage, scale in zip(frozen.stages, frozen.stage_scales, strict=True):
            step = unrolled_step(x, s, y_obs, stage, local, scale)
            x, s = step.x, step.s
    gradient = local.misfit_gradient(x, y_obs)
    return SampleRecord(
        ground_truth=ground_truth,
        x=x,
        s=s,
        gradient=gradient,
        sample_id=sample_id,
        stage_index=stage_index,
        solves=counter.snapshot(),
    )


def make_stage_dataset(
    samples: Sequence[tuple[Volume, Traces]],
    plan_so_far: ReconstructionPlan | None,
    operator: WaveOperator,
    *,
    memory_channels: int,
    dtype: np.dtype | str = np.float32,
    threads: int = 1,
) -> list[SampleRecord]:
    """Records for stage i = len(plan_so_far.stages); costs 2N(i+1) solves.

    Samples are processed independently; results keep the input order for any
    thread count.
    """
    stage_index = 0 if plan_so_far is None else plan_so_far.n_stages
    numpy_dtype = np.dtype(dtype)

    def build(item: tuple[int, tuple[Volume, Traces]]) -> SampleRecord:
        sample_id, (ground_truth, y_obs) = item
        return _build_record(
            sample_id,
            ground_truth,
            y_obs,
            plan_so_far,
            stage_index,
            operator,
            memory_channels,
            numpy_dtype,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(build, enumerate(samples)))
    log.info(
        "unroll.stage_dataset_built",
        stage=stage_index,
        samples=len(records),
        pde_solves=sum(record.solves.total for record in records),
    )
    return records


__all__ = ["SampleRecord", "make_stage_dataset"]
