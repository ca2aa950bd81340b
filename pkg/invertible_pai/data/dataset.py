"""Simulated training and evaluation datasets on disk.

Layout of a dataset directory::

    manifest.json
    sample_<k>_gt.f64        (+ .meta.json)   ground-truth initial pressure
    sample_<k>_traces.f64    (+ .meta.json)   subsampled, noisy traces

The manifest is written last and atomically; a directory without one is not
a dataset.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from invertible_pai.core.exceptions import DataIntegrityError, StorageError
from invertible_pai.data.arrays import (
    atomic_write_bytes,
    read_array,
    sha256_bytes,
    write_array,
)
from invertible_pai.data.phantom import PhantomSpec, gen_phantom
from invertible_pai.wave.fields import Traces, Volume, subsample_traces
from invertible_pai.wave.grid import (
    ReceiverGeometry,
    SimGrid,
    SubsampleScheme,
    make_full_geometry,
    make_subsampled_geometry,
)
from invertible_pai.wave.noise import NoiseSpec, add_noise
from invertible_pai.wave.operator import SolveCounter, WaveOperator

log = structlog.get_logger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_UINT64_LIMIT = 2**64


class SampleEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    index: int
    ground_truth: str
    ground_truth_sha256: str
    traces: str
    traces_sha256: str
    phantom_seed: int
    noise_seed: int


class DatasetManifest(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: int = FORMAT_VERSION
    grid: SimGrid
    subsample_factor: int = Field(ge=1)
    scheme: SubsampleScheme
    n_active_receivers: int
    noise: NoiseSpec
    phantom: PhantomSpec
    n_samples: int = Field(ge=0)
    samples: list[SampleEntry]
    pde_solves: int = Field(ge=0)

    def geometry(self) -> ReceiverGeometry:
        return make_subsampled_geometry(self.grid, self.subsample_factor, self.scheme)


@dataclass(frozen=True, eq=False)
class LoadedDataset:
    manifest: DatasetManifest
    checksum: str
    geometry: ReceiverGeometry
    ground_truths: list[Volume]
    traces: list[Traces]

    @property
    def grid(self) -> SimGrid:
        return self.manifest.grid

    def pairs(self) -> list[tuple[Volume, Traces]]:
        return list(zip(self.ground_truths, self.traces, strict=True))


def simulate_dataset(  # noqa: PLR0913
    n: int,
    grid: SimGrid,
    factor: int,
    scheme: SubsampleScheme,
    noise: NoiseSpec,
    spec: PhantomSpec,
    out_dir: Path,
    *,
    threads: int = 1,
    counter: SolveCounter | None = None,
) -> DatasetManifest:
    """Phantom, full-aperture forward solve, subsample, noise; n solves total.

    Sample k uses phantom seed ``spec.seed + k`` and noise seed
    ``noise.seed + k`` (both modulo 2**64).
    """
    if not out_dir.is_dir():
        message = f"Output directory {out_dir} does not exist."
        raise StorageError(message)
    geometry = make_subsampled_geometry(grid, factor, scheme)
    counter = counter if counter is not None else SolveCounter()
    full = WaveOperator(grid, make_full_geometry(grid), counter.child())
    before = full.counter.snapshot()

    def simulate(index: int) -> SampleEntry:
        phantom_seed = (spec.seed + index) % _UINT64_LIMIT
        noise_seed = (noise.seed + index) % _UINT64_LIMIT
        truth = gen_phantom(grid, spec.with_seed(phantom_seed))
        clean = subsample_traces(full.forward(truth), geometry)
        noisy = add_noise(clean, noise.model_copy(update={"seed": noise_seed}))
        gt_name = f"sample_{index}_gt.f64"
        traces_name = f"sample_{index}_traces.f64"
        return SampleEntry(
            index=index,
            ground_truth=gt_name,
            ground_truth_sha256=write_array(out_dir / gt_name, truth.values),
            traces=traces_name,
            traces_sha256=write_array(out_dir / traces_name, noisy.values),
            phantom_seed=phantom_seed,
            noise_seed=noise_seed,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        entries = list(executor.map(simulate, range(n)))
    manifest = DatasetManifest(
        grid=grid,
        subsample_factor=factor,
        scheme=scheme,
        n_active_receivers=geometry.n_active,
        noise=noise,
        phantom=spec,
        n_samples=n,
        samples=entries,
        pde_solves=(full.counter.snapshot() - before).total,
    )
    atomic_write_bytes(
        out_dir / MANIFEST_NAME, manifest.model_dump_json(indent=2).encode("utf-8")
    )
    log.info(
        "data.dataset_simulated",
        path=str(out_dir),
        samples=n,
        pde_solves=manifest.pde_solves,
    )
    return manifest


def read_manifest(path: Path) -> tuple[DatasetManifest, str]:
    """Parse ``manifest.json`` under `path`; returns it with its checksum."""
    manifest_file = path / MANIFEST_NAME
    try:
        raw = manifest_file.read_bytes()
    except OSError as exc:
        message = f"Cannot read dataset manifest {manifest_file}: {exc}"
        raise StorageError(message) from exc
    try:
        manifest = DatasetManifest.model_validate_json(raw)
    except ValidationError as exc:
        first = exc.errors()[0]["msg"]
        message = f"Malformed dataset manifest {manifest_file}: {first}"
        raise DataIntegrityError(message) from exc
    if manifest.format_version != FORMAT_VERSION:
        message = (
            f"Dataset format version {manifest.format_version} is not supported "
            f"(expected {FORMAT_VERSION})."
        )
        raise DataIntegrityError(message)
    if len(manifest.samples) != manifest.n_samples:
        message = (
            f"Manifest lists {len(manifest.samples)} samples but declares "
            f"{manifest.n_samples}."
        )
        raise DataIntegrityError(message)
    return manifest, sha256_bytes(raw)


def load_dataset(path: Path) -> LoadedDataset:
    """Load every sample of a dataset, verifying all checksums."""
    manifest, checksum = read_manifest(path)
    geometry = manifest.geometry()
    if geometry.n_active != manifest.n_active_receivers:
        message = (
            f"Manifest records {manifest.n_active_receivers} receivers; the "
            f"acquisition yields {geometry.n_active}."
        )
        raise DataIntegrityError(message)
    truths: list[Volume] = []
    traces: list[Traces] = []
    for entry in manifest.samples:
        truth = read_array(path / entry.ground_truth, entry.ground_truth_sha256)
        recorded = read_array(path / entry.traces, entry.traces_sha256)
        try:
            truths.append(Volume(manifest.grid, truth))
            traces.append(Traces(geometry, recorded))
        except ValueError as exc:
            message = f"Sample {entry.index} does not match the acquisition: {exc}"
            raise DataIntegrityError(message) from exc
    log.info("data.dataset_loaded", path=str(path), samples=len(truths))
    return LoadedDataset(manifest, checksum, geometry, truths, traces)


__all__ = [
    "MANIFEST_NAME",
    "DatasetManifest",
    "LoadedDataset",
    "SampleEntry",
    "load_dataset",
    "read_manifest",
    "simulate_dataset",
]
