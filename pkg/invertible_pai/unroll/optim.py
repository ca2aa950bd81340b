"""Training configuration and a pure Adam update."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from invertible_pai.core.exceptions import ShapeMismatchError

_UINT64_LIMIT = 2**64


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(1e-3, gt=0)
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    epochs_per_stage: int = Field(20, ge=0)
    batch_size: int = Field(4, gt=0)
    seed: int = Field(0, ge=0, lt=_UINT64_LIMIT)
    loss: Literal["mse"] = "mse"
    gradient_scaling: bool = Field(
        default=True,
        description="Normalize the injected gradient by its largest training RMS.",
    )


@dataclass(frozen=True, eq=False)
class OptimizerState:
    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> OptimizerState:
        moments = tuple(np.zeros(p.shape, dtype=np.float64) for p in params)
        return cls(moments, tuple(np.zeros_like(m) for m in moments), 0)


def adam_update(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    opt: OptimizerState,
    cfg: TrainConfig,
) -> tuple[list[np.ndarray], OptimizerState]:
    """One bias-corrected Adam step; inputs are left untouched.

    Moments are kept in double precision and parameters keep their dtype.
    """
    if len(params) != len(grads) or len(params) != len(opt.first_moment):
        message = (
            f"Adam needs matching lists; got {len(params)} params, {len(grads)} "
            f"grads, {len(opt.first_moment)} moments."
        )
        raise ShapeMismatchError(message)
    beta1, beta2 = cfg.adam_beta1, cfg.adam_beta2
    step = opt.step + 1
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step
    new_params: list[np.ndarray] = []
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    for param, grad, m, v in zip(
        params, grads, opt.first_moment, opt.second_moment, strict=True
    ):
        if param.shape != grad.shape or param.shape != m.shape:
            message = f"Shape mismatch in Adam: {param.shape} vs {grad.shape}."
            raise ShapeMismatchError(message)
        g = grad.astype(np.float64)
        m_next = beta1 * m + (1.0 - beta1) * g
        v_next = beta2 * v + (1.0 - beta2) * g * g
        update = (m_next / correction1) / (np.sqrt(v_next / correction2) + cfg.adam_eps)
        new_params.append(
            (param.astype(np.float64) - cfg.learning_rate * update).astype(param.dtype)
        )
        first.append(m_next)
        second.append(v_next)
    return new_params, OptimizerState(tuple(first), tuple(second), step)


__all__ = ["OptimizerState", "TrainConfig", "adam_update"]
