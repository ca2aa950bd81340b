"""Invertible stages: stacks of coupling layers with an optional multiscale plan.

A stage maps the channel-stacked state (x, s) bijectively for a fixed
conditioning field. Its backward pass walks the layers in reverse and
reconstructs every layer input by inversion, so only one layer's activations
are ever cached, whatever the depth.

Contract: `stage_backward` must receive the exact output that `stage_forward`
produced with the same parameters and conditioning. Any other pairing
reconstructs meaningless inputs without raising; downstream checks (e.g. a
round trip) are the only way to detect it.
"""

from __future__ import annotations

import hashlib
import math
import time
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Literal, Self

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.inn.cache import ActivationCache, ActivationCacheStats
from invertible_pai.inn.conv import ConvKernel
from invertible_pai.inn.coupling import (
    DEFAULT_SLOPE,
    CouplingLayerParams,
    coupling_backward,
    coupling_forward,
    coupling_inverse,
)
from invertible_pai.inn.squeeze import squeeze, unsqueeze
from invertible_pai.observability.metrics import STAGE_PASS_SECONDS

log = structlog.get_logger(__name__)

SqueezeOp = Literal["squeeze", "unsqueeze"]

# Default multiscale plan: squeeze after this many layers, unsqueeze before
# the last layer; applied only when the stage is deep enough for both.
_DEFAULT_SQUEEZE_AFTER = 4
_MIN_DEPTH_FOR_SQUEEZE = _DEFAULT_SQUEEZE_AFTER + 2


class ArchitectureSpec(BaseModel):
    """Widths, depth and multiscale plan of one unrolled stage."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_channels: int = Field(8, ge=2, description="State channels: 1 x + memory.")
    depth: int = Field(12, ge=1, description="Coupling layers per stage.")
    hidden_channels: int = Field(16, ge=1, description="Width inside each f.")
    kernel_size: int = Field(3, ge=1, description="Odd convolution extent.")
    slope: float = Field(DEFAULT_SLOPE, gt=0, description="Leaky ReLU slope.")
    ndim: Literal[2, 3] = Field(2, description="Spatial axes of the network.")
    conditioning_channels: int = Field(1, ge=1, description="Injected channels.")
    squeeze_plan: tuple[tuple[int, SqueezeOp], ...] | None = Field(
        default=None,
        description=(
            "(layers applied before, op) pairs; None selects the default plan."
        ),
    )
    dtype: Literal["float32", "float64"] = Field("float32")

    @model_validator(mode="after")
    def validate_layout(self) -> Self:
        if self.n_channels % 2:
            message = f"n_channels must be even for coupling; got {self.n_channels}."
            raise ValueError(message)
        if self.kernel_size % 2 == 0:
            message = f"kernel_size must be odd; got {self.kernel_size}."
            raise ValueError(message)
        level = 0
        last_position = 0
        for position, op in self.resolved_squeeze_plan():
            if not 0 <= position <= self.depth or position < last_position:
                message = f"Squeeze plan positions must be sorted in [0, {self.depth}]."
                raise ValueError(message)
            last_position = position
            level += 1 if op == "squeeze" else -1
            if level < 0:
                message = "Squeeze plan unsqueezes below the input resolution."
                raise ValueError(message)
        if level != 0:
            message = "Squeeze plan must return to the input resolution."
            raise ValueError(message)
        return self

    def resolved_squeeze_plan(self) -> tuple[tuple[int, SqueezeOp], ...]:
        if self.squeeze_plan is not None:
            return self.squeeze_plan
        if self.depth >= _MIN_DEPTH_FOR_SQUEEZE:
            return ((_DEFAULT_SQUEEZE_AFTER, "squeeze"), (self.depth - 1, "unsqueeze"))
        return ()

    def layer_levels(self) -> list[int]:
        """Squeeze depth at which each coupling layer runs."""
        plan = list(self.resolved_squeeze_plan())
        levels = []
        level = cursor = 0
        for position in range(self.depth):
            while cursor < len(plan) and plan[cursor][0] == position:
                level += 1 if plan[cursor][1] == "squeeze" else -1
                cursor += 1
            levels.append(level)
        return levels

    @property
    def max_level(self) -> int:
        level = deepest = 0
        for _, op in self.resolved_squeeze_plan():
            level += 1 if op == "squeeze" else -1
            deepest = max(deepest, level)
        return deepest

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def check_spatial(self, spatial: tuple[int, ...]) -> None:
        """Spatial dimensions must be divisible by 2**max_level."""
        if len(spatial) != self.ndim:
            message = f"Network is {self.ndim}D; spatial shape is {spatial}."
            raise ShapeMismatchError(message)
        factor = 2**self.max_level
        if any(n % factor for n in spatial):
            message = (
                f"Spatial shape {spatial} is not divisible by {factor} as the "
                "squeeze plan requires."
            )
            raise ShapeMismatchError(message)


@dataclass(frozen=True, eq=False)
class InnState:
    """Current estimate (1 channel) and memory (n_s channels) of one iterate."""

    x_part: np.ndarray
    s_part: np.ndarray

    def __post_init__(self) -> None:
        if self.x_part.shape[0] != 1 or self.x_part.shape[1:] != self.s_part.shape[1:]:
            message = (
                f"InnState needs x of shape (1, *spatial) matching s; got "
                f"{self.x_part.shape} and {self.s_part.shape}."
            )
            raise ShapeMismatchError(message)

    @property
    def n_channels(self) -> int:
        return 1 + int(self.s_part.shape[0])

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return tuple(self.x_part.shape[1:])

    def stack(self) -> np.ndarray:
        return np.concatenate((self.x_part, self.s_part), axis=0)

    @classmethod
    def from_stacked(cls, stacked: np.ndarray) -> InnState:
        return cls(stacked[:1], stacked[1:])

    @classmethod
    def zeros(
        cls, n_channels: int, spatial: tuple[int, ...], dtype: np.dtype | str
    ) -> InnState:
        return cls(
            np.zeros((1, *spatial), dtype=dtype),
            np.zeros((n_channels - 1, *spatial), dtype=dtype),
        )


@dataclass(frozen=True, eq=False)
class StageParams:
    """Parameters theta_i of one unrolled stage."""

    spec: ArchitectureSpec
    layers: tuple[CouplingLayerParams, ...]

    def __post_init__(self) -> None:
        if len(self.layers) != self.spec.depth:
            message = f"Expected {self.spec.depth} layers; got {len(self.layers)}."
            raise ShapeMismatchError(message)
        group = 2**self.spec.ndim
        for index, (layer, level) in enumerate(
            zip(self.layers, self.layer_levels(), strict=True)
        ):
            expected = self.spec.n_channels * group**level
            if layer.channels != expected:
                message = (
                    f"Layer {index} transforms {layer.channels} channels; "
                    f"{expected} expected at squeeze level {level}."
                )
                raise ShapeMismatchError(message)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def squeeze_plan(self) -> tuple[tuple[int, SqueezeOp], ...]:
        return self.spec.resolved_squeeze_plan()

    def schedule(self) -> Iterator[tuple[str, int]]:
        """Yield ("layer", index) and ("squeeze"/"unsqueeze", position) in order."""
        plan = list(self.squeeze_plan)
        cursor = 0
        for position in range(self.n_layers + 1):
            while cursor < len(plan) and plan[cursor][0] == position:
                yield plan[cursor][1], position
                cursor += 1
            if position < self.n_layers:
                yield "layer", position

    def layer_levels(self) -> list[int]:
        return self.spec.layer_levels()

    def arrays(self) -> list[np.ndarray]:
        return [array for layer in self.layers for array in layer.arrays()]

    def with_arrays(self, arrays: list[np.ndarray]) -> StageParams:
        per_layer = 4
        if len(arrays) != per_layer * self.n_layers:
            message = f"Expected {per_layer * self.n_layers} arrays; got {len(arrays)}."
            raise ShapeMismatchError(message)
        return StageParams(
            self.spec,
            tuple(
                layer.with_arrays(arrays[per_layer * i : per_layer * (i + 1)])
                for i, layer in enumerate(self.layers)
            ),
        )

    def zeros_like(self) -> StageParams:
        return self.with_arrays([np.zeros_like(array) for array in self.arrays()])

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for array in self.arrays():
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()


def init_params(
    spec: ArchitectureSpec, seed: int, output_scale: float = 0.0
) -> StageParams:
    """Seeded initialization; every f ends in a zero conv so the stage is identity.

    First convolutions are uniform with He fan-in scaling. A positive
    `output_scale` draws the last convolution from N(0, output_scale**2)
    instead, giving a non-trivial stage for checks and tests.
    """
    dtype = spec.numpy_dtype
    k = spec.kernel_size
    taps = (k,) * spec.ndim
    group = 2**spec.ndim
    layer_rngs = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(seed).spawn(spec.depth)
    ]
    levels = spec.layer_levels()
    layers = []
    for index, (rng, level) in enumerate(zip(layer_rngs, levels, strict=True)):
        half = spec.n_channels * group**level // 2
        cond = spec.conditioning_channels * group**level
        fan_in = (half + cond) * k**spec.ndim
        bound = math.sqrt(6.0 / fan_in)
        w1 = rng.uniform(-bound, bound, size=(spec.hidden_channels, half + cond, *taps))
        w2 = np.zeros((half, spec.hidden_channels, *taps))
        b2 = np.zeros(half)
        if output_scale > 0:
            w2 = rng.normal(0.0, output_scale, size=w2.shape)
            b2 = rng.normal(0.0, output_scale, size=b2.shape)
        layers.append(
            CouplingLayerParams(
                conv1=ConvKernel(
                    w1.astype(dtype), np.zeros(spec.hidden_channels, dtype=dtype)
                ),
                conv2=ConvKernel(w2.astype(dtype), b2.astype(dtype)),
                parity=index % 2,
                slope=spec.slope,
            )
        )
    return StageParams(spec, tuple(layers))


def conditioning_pyramid(grad_field: np.ndarray, levels: int) -> list[np.ndarray]:
    """Conditioning field at every squeeze level used by a stage."""
    pyramid = [grad_field]
    for _ in range(levels):
        pyramid.append(squeeze(pyramid[-1]))
    return pyramid


def _prepare(
    state: InnState, grad_field: np.ndarray, params: StageParams
) -> tuple[np.ndarray, list[np.ndarray]]:
    spec = params.spec
    if state.n_channels != spec.n_channels:
        message = (
            f"State has {state.n_channels} channels; stage expects {spec.n_channels}."
        )
        raise ShapeMismatchError(message)
    if grad_field.shape != (spec.conditioning_channels, *state.spatial_shape):
        message = (
            f"Conditioning shape {grad_field.shape} does not match "
            f"{(spec.conditioning_channels, *state.spatial_shape)}."
        )
        raise ShapeMismatchError(message)
    spec.check_spatial(state.spatial_shape)
    dtype = spec.numpy_dtype
    pyramid = conditioning_pyramid(grad_field.astype(dtype), spec.max_level)
    return state.stack().astype(dtype), pyramid


def stage_forward(
    state: InnState,
    grad_field: np.ndarray,
    params: StageParams,
    record: ActivationCacheStats | None = None,
) -> InnState:
    """Apply the stage; `grad_field` conditions every coupling layer."""
    start = time.perf_counter()
    field, pyramid = _prepare(state, grad_field, params)
    cache = ActivationCache(record) if record is not None else None
    level = 0
    for kind, index in params.schedule():
        if kind == "squeeze":
            field, level = squeeze(field), level + 1
        elif kind == "unsqueeze":
            field, level = unsqueeze(field), level - 1
        else:
            field = coupling_forward(field, pyramid[level], params.layers[index], cache)
    STAGE_PASS_SECONDS.labels(direction="forward").observe(time.perf_counter() - start)
    return InnState.from_stacked(field)


def stage_inverse(
    state_out: InnState, grad_field: np.ndarray, params: StageParams
) -> InnState:
    start = time.perf_counter()
    field, pyramid = _prepare(state_out, grad_field, params)
    level = 0
    for kind, index in reversed(list(params.schedule())):
        if kind == "squeeze":
            field, level = unsqueeze(field), level - 1
        elif kind == "unsqueeze":
            field, level = squeeze(field), level + 1
        else:
            field = coupling_inverse(field, pyramid[level], params.layers[index])
    STAGE_PASS_SECONDS.labels(direction="inverse").observe(time.perf_counter() - start)
    return InnState.from_stacked(field)


@dataclass(frozen=True, eq=False)
class StageBackwardResult:
    reconstructed_input: InnState
    grad_input: np.ndarray
    grad_params: StageParams
    grad_conditioning: np.ndarray
    stats: ActivationCacheStats


def stage_backward(
    output: InnState,
    grad_wrt_output: np.ndarray,
    grad_field: np.ndarray,
    params: StageParams,
) -> StageBackwardResult:
    """Gradients of a stage by layer-wise inversion and local recomputation."""
    start = time.perf_counter()
    field, pyramid = _prepare(output, grad_field, params)
    if grad_wrt_output.shape != field.shape:
        message = (
            f"Output gradient shape {grad_wrt_output.shape} does not match "
            f"{field.shape}."
        )
        raise ShapeMismatchError(message)
    grad = grad_wrt_output.astype(field.dtype)
    stats = ActivationCacheStats()
    cache = ActivationCache(stats)
    grad_layers: list[CouplingLayerParams | None] = [None] * params.n_layers
    grad_cond = [np.zeros_like(level_field) for level_field in pyramid]
    level = 0
    for kind, index in reversed(list(params.schedule())):
        if kind == "squeeze":
            field, grad, level = unsqueeze(field), unsqueeze(grad), level - 1
        elif kind == "unsqueeze":
            field, grad, level = squeeze(field), squeeze(grad), level + 1
        else:
            result = coupling_backward(
                field, grad, pyramid[level], params.layers[index], cache
            )
            field, grad = result.state_in, result.grad_in
            grad_layers[index] = result.grad_params
            grad_cond[level] += result.grad_cond
    for depth in range(len(grad_cond) - 1, 0, -1):
        grad_cond[depth - 1] += unsqueeze(grad_cond[depth])
    grad_params = StageParams(
        params.spec, tuple(layer for layer in grad_layers if layer is not None)
    )
    seconds = time.perf_counter() - start
    STAGE_PASS_SECONDS.labels(direction="backward").observe(seconds)
    log.debug(
        "inn.stage_backward",
        depth=params.n_layers,
        peak_cached_tensors=stats.peak_cached_tensors,
        seconds=seconds,
    )
    return StageBackwardResult(
        reconstructed_input=InnState.from_stacked(field),
        grad_input=grad,
        grad_params=grad_params,
        grad_conditioning=grad_cond[0],
        stats=stats,
    )


def stored_activation_stats(
    params: StageParams, spatial: tuple[int, ...]
) -> ActivationCacheStats:
    """Cache a conventional backward pass would hold for the same stage.

    Such a pass keeps every layer input plus the three activations of each f
    until the backward sweep reaches that layer, so it grows with depth.
    """
    spec = params.spec
    voxels = math.prod(spatial)
    group = 2**spec.ndim
    tensors = 0
    scalars = 0
    for layer, level in zip(params.layers, params.layer_levels(), strict=True):
        coarse = voxels // group**level
        tensors += 4
        scalars += coarse * (
            layer.channels
            + layer.conv1.in_channels
            + 2 * layer.conv1.out_channels
        )
    return ActivationCacheStats(
        peak_cached_tensors=tensors, peak_cached_scalars=scalars
    )


__all__ = [
    "ArchitectureSpec",
    "InnState",
    "StageBackwardResult",
    "StageParams",
    "conditioning_pyramid",
    "init_params",
    "stage_backward",
    "stage_forward",
    "stage_inverse",
    "stored_activation_stats",
]
