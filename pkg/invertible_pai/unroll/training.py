"""Greedy stagewise training of the unrolled network.

Stage i is fully trained on records produced by the frozen stages 0..i-1
before stage i+1 is touched. Gradients reach the parameters through
`stage_backward` only; the physics is baked into the records.
"""

from __future__ import annotations

import hashlib
import json
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import structlog

from invertible_pai.core.exceptions import NumericalError, ShapeMismatchError
from invertible_pai.inn.stage import (
    ArchitectureSpec,
    StageParams,
    init_params,
    stage_backward,
    stage_forward,
)
from invertible_pai.observability.metrics import TRAIN_EPOCHS, TRAIN_LOSS
from invertible_pai.unroll.optim import OptimizerState, TrainConfig, adam_update
from invertible_pai.unroll.plan import ReconstructionPlan, conditioning, network_state
from invertible_pai.unroll.records import SampleRecord, make_stage_dataset
from invertible_pai.wave.noise import rms

if TYPE_CHECKING:
    from invertible_pai.data.checkpoints import CheckpointStore
    from invertible_pai.wave.fields import Traces, Volume
    from invertible_pai.wave.operator import WaveOperator

log = structlog.get_logger(__name__)

_UINT64_LIMIT = 2**64


@dataclass(frozen=True, slots=True)
class EpochLoss:
    epoch: int
    mean_loss: float
    wall_time: float

    def to_line(self) -> str:
        return f"{self.epoch} {self.mean_loss:.17g} {self.wall_time:.6f}"


@dataclass(frozen=True, eq=False)
class TrainedStage:
    params: StageParams
    history: list[EpochLoss]
    scale: float


def gradient_scale(records: Sequence[SampleRecord]) -> float:
    """Reciprocal of the largest gradient RMS over the records (1 if all vanish)."""
    largest = max((rms(record.gradient.values) for record in records), default=0.0)
    return 1.0 / largest if largest > 0 else 1.0


def stage_loss_and_gradient(
    record: SampleRecord, params: StageParams, scale: float = 1.0
) -> tuple[float, list[np.ndarray]]:
    """MSE of the stage's x-output against the ground truth and its gradient."""
    spec = params.spec
    cond = conditioning(record.gradient, scale, spec)
    out = stage_forward(network_state(record.x, record.s, spec), cond, params)
    diff = out.x_part[0].astype(np.float64) - record.ground_truth.spatial()
    loss = float(np.mean(diff * diff))
    grad_out = np.zeros((spec.n_channels, *diff.shape), dtype=spec.numpy_dtype)
    grad_out[0] = (2.0 / diff.size) * diff
    result = stage_backward(out, grad_out, cond, params)
    return loss, result.grad_params.arrays()


def evaluate_loss(
    records: Sequence[SampleRecord], params: StageParams, scale: float = 1.0
) -> float:
    """Mean per-sample MSE without taking a step."""
    spec = params.spec
    losses = []
    for record in records:
        cond = conditioning(record.gradient, scale, spec)
        out = stage_forward(network_state(record.x, record.s, spec), cond, params)
        diff = out.x_part[0].astype(np.float64) - record.ground_truth.spatial()
        losses.append(float(np.mean(diff * diff)))
    return float(np.mean(losses))


def train_stage(
    records: Sequence[SampleRecord],
    stage: StageParams,
    cfg: TrainConfig,
    *,
    scale: float = 1.0,
    stage_index: int = 0,
) -> TrainedStage:
    """Minimize the records' mean squared x-error over the stage with Adam."""
    if not records:
        message = "Cannot train a stage without records."
        raise ShapeMismatchError(message)
    if cfg.epochs_per_stage == 0:
        return TrainedStage(stage, [], scale)
    rng = np.random.default_rng([cfg.seed, stage_index])
    params = stage
    opt = OptimizerState.zeros_like(params.arrays())
    history: list[EpochLoss] = []
    label = str(stage_index)
    started = time.perf_counter()
    for epoch in range(cfg.epochs_per_stage):
        order = rng.permutation(len(records))
        epoch_losses: list[float] = []
        for batch_start in range(0, len(order), cfg.batch_size):
            batch = order[batch_start : batch_start + cfg.batch_size]
            batch_grads: list[np.ndarray] | None = None
            for position in batch:
                loss, grads = stage_loss_and_gradient(
                    records[int(position)], params, scale
                )
                epoch_losses.append(loss)
                if batch_grads is None:
                    batch_grads = [g.astype(np.float64) for g in grads]
                else:
                    for total, g in zip(batch_grads, grads, strict=True):
                        total += g
            assert batch_grads is not None  # noqa: S101
            mean_grads = [g / len(batch) for g in batch_grads]
            batch_loss = float(np.mean(epoch_losses[-len(batch) :]))
            if not np.isfinite(batch_loss) or not all(
                np.all(np.isfinite(g)) for g in mean_grads
            ):
                message = (
                    f"Non-finite loss or gradient in stage {stage_index}, "
                    f"epoch {epoch}."
                )
                raise NumericalError(
                    message,
                    diagnostics={
                        "stage": stage_index,
                        "epoch": epoch,
                        "batch_start": batch_start,
                        "batch_loss": batch_loss,
                        "last_epoch_loss": history[-1].mean_loss if history else None,
                    },
                )
            arrays, opt = adam_update(params.arrays(), mean_grads, opt, cfg)
            params = params.with_arrays(arrays)
        entry = EpochLoss(
            epoch=epoch,
            mean_loss=float(np.mean(epoch_losses)),
            wall_time=time.perf_counter() - started,
        )
        history.append(entry)
        TRAIN_EPOCHS.labels(stage=label).inc()
        TRAIN_LOSS.labels(stage=label).set(entry.mean_loss)
        log.info(
            "train.epoch",
            stage=stage_index,
            epoch=epoch,
            mean_loss=entry.mean_loss,
            wall_time=entry.wall_time,
        )
    return TrainedStage(params, history, scale)


def stage_fingerprint(
    spec: ArchitectureSpec,
    cfg: TrainConfig,
    dataset_checksum: str,
    stage_index: int,
    previous: Sequence[str] = (),
) -> str:
    """Identity of a stage's training inputs; a match allows reuse on resume."""
    payload = {
        "architecture": spec.model_dump(mode="json"),
        "training": cfg.model_dump(mode="json"),
        "dataset": dataset_checksum,
        "stage": stage_index,
        "previous": list(previous),
    }
    encoded = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


@dataclass(frozen=True, eq=False)
class PlanTrainingResult:
    plan: ReconstructionPlan
    histories: dict[int, list[EpochLoss]] = field(default_factory=dict)
    resumed_stages: list[int] = field(default_factory=list)


def train_plan(  # noqa: PLR0913
    samples: Sequence[tuple[Volume, Traces]],
    spec: ArchitectureSpec,
    cfg: TrainConfig,
    n_stages: int,
    operator: WaveOperator,
    *,
    store: CheckpointStore | None = None,
    dataset_checksum: str = "",
    threads: int = 1,
) -> PlanTrainingResult:
    """Train K stages greedily, reusing checkpoints whose fingerprint matches."""
    stages: list[StageParams] = []
    scales: list[float] = []
    fingerprints: list[str] = []
    histories: dict[int, list[EpochLoss]] = {}
    resumed: list[int] = []
    for index in range(n_stages):
        fingerprint = stage_fingerprint(
            spec, cfg, dataset_checksum, index, fingerprints
        )
        if store is not None and store.has_stage(index, fingerprint):
            params, scale = store.load_stage(index, spec)
            resumed.append(index)
            log.info("train.stage_resumed", stage=index)
        else:
            frozen = None
            if stages:
                frozen = ReconstructionPlan(tuple(stages), tuple(scales))
            records = make_stage_dataset(
                samples,
                frozen,
                operator,
                memory_channels=spec.n_channels - 1,
                dtype=spec.dtype,
                threads=threads,
            )
            scale = gradient_scale(records) if cfg.gradient_scaling else 1.0
            initial = init_params(spec, (cfg.seed + index) % _UINT64_LIMIT)
            trained = train_stage(
                records, initial, cfg, scale=scale, stage_index=index
            )
            params = trained.params
            histories[index] = trained.history
            if store is not None:
                store.save_stage(
                    index,
                    params,
                    scale=scale,
                    fingerprint=fingerprint,
                    history=trained.history,
                )
            log.info(
                "train.stage_trained",
                stage=index,
                scale=scale,
                final_loss=trained.history[-1].mean_loss if trained.history else None,
            )
        stages.append(params)
        scales.append(scale)
        fingerprints.append(fingerprint)
    return PlanTrainingResult(
        plan=ReconstructionPlan(tuple(stages), tuple(scales)),
        histories=histories,
        resumed_stages=resumed,
    )


__all__ = [
    "EpochLoss",
    "PlanTrainingResult",
    "TrainedStage",
    "evaluate_loss",
    "gradient_scale",
    "stage_fingerprint",
    "stage_loss_and_gradient",
    "train_plan",
    "train_stage",
]
