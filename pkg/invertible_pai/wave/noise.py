"""Gaussian measurement noise at a prescribed signal-to-noise ratio."""

from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from invertible_pai.core.exceptions import NoiseError
from invertible_pai.wave.fields import Traces

_UINT64_LIMIT = 2**64


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    snr_db: float = Field(10.0, description="Target SNR in dB, 20*log10 of RMS ratio.")
    seed: int = Field(0, ge=0, lt=_UINT64_LIMIT, description="PRNG seed.")

    @field_validator("snr_db")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            message = "snr_db must be finite."
            raise ValueError(message)
        return value


def rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values))))


def noise_sigma(signal: np.ndarray, snr_db: float) -> float:
    """Standard deviation giving ``snr_db`` against the signal RMS."""
    if signal.size == 0:
        message = "Cannot add noise to empty traces."
        raise NoiseError(message)
    level = rms(signal)
    if level == 0.0:
        message = "Signal is identically zero; SNR is undefined."
        raise NoiseError(message)
    return level / 10.0 ** (snr_db / 20.0)


def add_noise(y: Traces, spec: NoiseSpec) -> Traces:
    """Return ``y + eps`` with i.i.d. N(0, sigma^2) entries from a seeded PRNG."""
    sigma = noise_sigma(y.values, spec.snr_db)
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(y.values.shape) * sigma
    return Traces(y.geometry, y.values + noise)


__all__ = ["NoiseSpec", "add_noise", "noise_sigma", "rms"]
