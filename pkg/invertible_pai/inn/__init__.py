"""Invertible network blocks with memory-frugal backpropagation."""

from .cache import ActivationCache, ActivationCacheStats
from .conv import ConvKernel, conv_backward, conv_forward
from .coupling import (
    CouplingLayerParams,
    coupling_backward,
    coupling_forward,
    coupling_inverse,
)
from .squeeze import squeeze, unsqueeze
from .stage import (
    ArchitectureSpec,
    InnState,
    StageBackwardResult,
    StageParams,
    init_params,
    stage_backward,
    stage_forward,
    stage_inverse,
    stored_activation_stats,
)

__all__ = [
    "ActivationCache",
    "ActivationCacheStats",
    "ArchitectureSpec",
    "ConvKernel",
    "CouplingLayerParams",
    "InnState",
    "StageBackwardResult",
    "StageParams",
    "conv_backward",
    "conv_forward",
    "coupling_backward",
    "coupling_forward",
    "coupling_inverse",
    "init_params",
    "squeeze",
    "stage_backward",
    "stage_forward",
    "stage_inverse",
    "stored_activation_stats",
    "unsqueeze",
]
