"""Loop-unrolled reconstruction and greedy stagewise training."""

from .optim import OptimizerState, TrainConfig, adam_update
from .plan import (
    InitPolicy,
    ReconstructionPlan,
    ReconstructionResult,
    reconstruct,
    unrolled_step,
)
from .records import SampleRecord, make_stage_dataset
from .training import EpochLoss, train_plan, train_stage

__all__ = [
    "EpochLoss",
    "InitPolicy",
    "OptimizerState",
    "ReconstructionPlan",
    "ReconstructionResult",
    "SampleRecord",
    "TrainConfig",
    "adam_update",
    "make_stage_dataset",
    "reconstruct",
    "train_plan",
    "train_stage",
    "unrolled_step",
]
