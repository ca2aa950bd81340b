"""Wave-equation forward model, adjoint, acquisition and noise."""

from .fields import Traces, Volume, subsample_traces
from .grid import (
    ReceiverGeometry,
    SimGrid,
    SubsampleScheme,
    make_full_geometry,
    make_subsampled_geometry,
)
from .noise import NoiseSpec, add_noise
from .operator import (
    SolveCounter,
    SolveTally,
    WaveOperator,
    adjoint,
    forward,
    misfit_gradient,
)

__all__ = [
    "NoiseSpec",
    "ReceiverGeometry",
    "SimGrid",
    "SolveCounter",
    "SolveTally",
    "SubsampleScheme",
    "Traces",
    "Volume",
    "WaveOperator",
    "add_noise",
    "adjoint",
    "forward",
    "make_full_geometry",
    "make_subsampled_geometry",
    "misfit_gradient",
    "subsample_traces",
]
