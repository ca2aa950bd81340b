"""Phantoms, datasets, checkpoints, metrics and image export."""

from .arrays import read_array, write_array
from .checkpoints import CheckpointStore, PlanManifest
from .dataset import DatasetManifest, LoadedDataset, load_dataset, simulate_dataset
from .imaging import Axis, Normalization, export_pgm, mip, read_pgm, slice_image
from .metrics import mse, psnr
from .phantom import PhantomSpec, gen_phantom

__all__ = [
    "Axis",
    "CheckpointStore",
    "DatasetManifest",
    "LoadedDataset",
    "Normalization",
    "PhantomSpec",
    "PlanManifest",
    "export_pgm",
    "gen_phantom",
    "load_dataset",
    "mip",
    "mse",
    "psnr",
    "read_array",
    "read_pgm",
    "simulate_dataset",
    "write_array",
]
