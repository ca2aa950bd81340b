"""Stage checkpoints for greedy training and reconstruction.

A checkpoint directory holds one ``stage_<i>.f64`` parameter file per trained
stage, its loss history ``loss_stage_<i>.txt`` (one line per epoch: epoch,
mean loss, wall seconds) and ``plan.json``, which lists every stage with its
checksum, gradient scale and training fingerprint. Rewriting ``plan.json``
after each stage makes training resumable at stage boundaries.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from invertible_pai.core.exceptions import DataIntegrityError, StorageError
from invertible_pai.data.arrays import atomic_write_bytes, read_array, write_array
from invertible_pai.inn.stage import ArchitectureSpec, StageParams, init_params
from invertible_pai.unroll.plan import ReconstructionPlan

if TYPE_CHECKING:
    from collections.abc import Sequence

    from invertible_pai.unroll.training import EpochLoss

log = structlog.get_logger(__name__)

PLAN_NAME = "plan.json"
FORMAT_VERSION = 1


class StageEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    index: int = Field(ge=0)
    file: str
    sha256: str
    fingerprint: str
    scale: float = Field(gt=0)
    n_parameters: int = Field(ge=0)
    loss_history: str


class PlanManifest(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: int = FORMAT_VERSION
    architecture: ArchitectureSpec
    stages: list[StageEntry] = Field(default_factory=list)


def flatten_params(params: StageParams) -> np.ndarray:
    return np.concatenate([array.ravel() for array in params.arrays()]).astype(
        np.float64
    )


def unflatten_params(flat: np.ndarray, spec: ArchitectureSpec) -> StageParams:
    template = init_params(spec, 0)
    arrays = []
    offset = 0
    for array in template.arrays():
        chunk = flat[offset : offset + array.size]
        if chunk.size != array.size:
            message = "Checkpoint holds fewer parameters than the architecture needs."
            raise DataIntegrityError(message)
        arrays.append(chunk.reshape(array.shape).astype(spec.numpy_dtype))
        offset += array.size
    if offset != flat.size:
        message = (
            f"Checkpoint holds {flat.size} parameters; the architecture has {offset}."
        )
        raise DataIntegrityError(message)
    return template.with_arrays(arrays)


class CheckpointStore:
    """Durable per-stage parameters under one directory."""

    def __init__(self, directory: Path) -> None:
        self._directory = directory

    @property
    def directory(self) -> Path:
        return self._directory

    def read_manifest(self) -> PlanManifest | None:
        path = self._directory / PLAN_NAME
        if not path.exists():
            return None
        try:
            return PlanManifest.model_validate_json(path.read_bytes())
        except OSError as exc:
            message = f"Cannot read plan manifest {path}: {exc}"
            raise StorageError(message) from exc
        except ValidationError as exc:
            message = f"Malformed plan manifest {path}: {exc.errors()[0]['msg']}"
            raise DataIntegrityError(message) from exc

    def has_stage(self, index: int, fingerprint: str) -> bool:
        manifest = self.read_manifest()
        if manifest is None:
            return False
        return any(
            entry.index == index and entry.fingerprint == fingerprint
            for entry in manifest.stages
        )

    def save_stage(
        self,
        index: int,
        params: StageParams,
        *,
        scale: float,
        fingerprint: str,
        history: Sequence[EpochLoss] = (),
    ) -> StageEntry:
        try:
            self._directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            message = f"Cannot create checkpoint directory {self._directory}: {exc}"
            raise StorageError(message) from exc
        flat = flatten_params(params)
        file_name = f"stage_{index}.f64"
        history_name = f"loss_stage_{index}.txt"
        checksum = write_array(self._directory / file_name, flat)
        lines = "".join(f"{entry.to_line()}\n" for entry in history)
        atomic_write_bytes(self._directory / history_name, lines.encode("utf-8"))
        entry = StageEntry(
            index=index,
            file=file_name,
            sha256=checksum,
            fingerprint=fingerprint,
            scale=scale,
            n_parameters=int(flat.size),
            loss_history=history_name,
        )
        previous = self.read_manifest()
        kept: list[StageEntry] = []
        if previous is not None and previous.architecture == params.spec:
            # Later stages were trained on top of the stage being replaced.
            kept = [stage for stage in previous.stages if stage.index < index]
        manifest = PlanManifest(architecture=params.spec, stages=[*kept, entry])
        atomic_write_bytes(
            self._directory / PLAN_NAME,
            manifest.model_dump_json(indent=2).encode("utf-8"),
        )
        log.info("checkpoint.stage_saved", stage=index, path=str(self._directory))
        return entry

    def load_stage(
        self, index: int, spec: ArchitectureSpec
    ) -> tuple[StageParams, float]:
        manifest = self.read_manifest()
        entry = None
        if manifest is not None:
            entry = next((e for e in manifest.stages if e.index == index), None)
        if manifest is None or entry is None:
            message = f"No checkpoint for stage {index} in {self._directory}."
            raise StorageError(message)
        if manifest.architecture != spec:
            message = "Checkpoint architecture differs from the configured one."
            raise DataIntegrityError(message)
        flat = read_array(self._directory / entry.file, entry.sha256)
        return unflatten_params(flat, spec), entry.scale

    def load_plan(self, n_stages: int | None = None) -> ReconstructionPlan:
        """Stages 0..K-1 in order; K defaults to every stored stage."""
        manifest = self.read_manifest()
        if manifest is None or not manifest.stages:
            message = f"No trained stages in {self._directory}."
            raise StorageError(message)
        available = sorted(entry.index for entry in manifest.stages)
        wanted = n_stages if n_stages is not None else len(available)
        if available[:wanted] != list(range(wanted)):
            message = (
                f"Checkpoint directory {self._directory} holds stages {available}; "
                f"stages 0..{wanted - 1} are required."
            )
            raise DataIntegrityError(message)
        loaded = [
            self.load_stage(index, manifest.architecture) for index in range(wanted)
        ]
        return ReconstructionPlan(
            tuple(params for params, _ in loaded),
            tuple(scale for _, scale in loaded),
        )


__all__ = [
    "PLAN_NAME",
    "CheckpointStore",
    "PlanManifest",
    "StageEntry",
    "flatten_params",
    "unflatten_params",
]
