"""Run configuration: one JSON file, environment variables and flag overrides."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from invertible_pai.baseline.lsqr import LsqrOptions
from invertible_pai.data.phantom import PhantomSpec
from invertible_pai.inn.stage import ArchitectureSpec
from invertible_pai.unroll.optim import TrainConfig
from invertible_pai.wave.grid import SimGrid, SubsampleScheme, make_subsampled_geometry
from invertible_pai.wave.noise import NoiseSpec

from .exceptions import ConfigurationError

CONFIG_ENV_VAR = "PAI_CONFIG"


class GeometryConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subsample_factor: int = Field(4, ge=1, description="Receiver reduction factor.")
    scheme: SubsampleScheme = Field(
        SubsampleScheme.TOTAL,
        description="'total': factor over all kept receivers; 'per_axis': stride.",
    )


class PlanConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_stages: int = Field(1, ge=1, description="Unrolled iterations K.")


class DatasetConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_samples: int = Field(50, ge=1, description="Samples written by 'simulate'.")


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Path = Field(Path("dataset"), description="Dataset directory.")
    checkpoints: Path = Field(Path("checkpoints"), description="Stage checkpoints.")
    output: Path = Field(Path("output"), description="Volumes, reports, images.")


class RunConfig(BaseSettings):
    """Everything a command needs, validated before any heavy work starts."""

    grid: SimGrid = Field(default_factory=SimGrid)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    phantom: PhantomSpec = Field(default_factory=PhantomSpec)
    architecture: ArchitectureSpec = Field(default_factory=ArchitectureSpec)
    training: TrainConfig = Field(default_factory=TrainConfig)
    plan: PlanConfig = Field(default_factory=PlanConfig)
    lsqr: LsqrOptions = Field(default_factory=LsqrOptions)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    seed: int = Field(0, ge=0, description="Seed of the diagnostic random draws.")
    threads: int = Field(1, ge=1, description="Worker cap for per-sample work.")
    log_json: bool = Field(default=False, description="Render logs as JSON.")
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        "INFO", description="Threshold of the root logger."
    )

    model_config = SettingsConfigDict(
        env_prefix="PAI_",
        env_nested_delimiter="__",
        extra="forbid",
        case_sensitive=False,
    )

    @model_validator(mode="after")
    def validate_consistency(self) -> Self:
        """Cross-section checks: acquisition fits the grid, network fits the grid."""
        make_subsampled_geometry(
            self.grid, self.geometry.subsample_factor, self.geometry.scheme
        )
        self._sync_network_dimension()
        self.architecture.check_spatial(self.grid.spatial_shape)
        return self

    def _sync_network_dimension(self) -> None:
        if self.architecture.ndim == self.grid.ndim:
            return
        if "ndim" in self.architecture.model_fields_set:
            message = (
                f"architecture.ndim={self.architecture.ndim} contradicts the "
                f"{self.grid.ndim}D grid."
            )
            raise ValueError(message)
        self.architecture = self.architecture.model_copy(
            update={"ndim": self.grid.ndim}
        )

    @classmethod
    def from_sources(
        cls,
        path: Path | None = None,
        overrides: Iterable[str] | None = None,
    ) -> Self:
        """Defaults < PAI_* environment < config file < ``dotted.path=value``.

        The config file defaults to the path in ``PAI_CONFIG`` when unset.

        Raises:
            ConfigurationError: For unreadable files, malformed JSON, bad
                overrides and every validation failure.

        """
        if path is None and os.environ.get(CONFIG_ENV_VAR):
            path = Path(os.environ[CONFIG_ENV_VAR])
        payload: dict[str, Any] = _read_config_file(path) if path is not None else {}
        for override in overrides or ():
            _apply_override(payload, override)
        try:
            return cls(**payload)
        except ValidationError as validation_error:
            raise cls._wrap_validation_error(validation_error) from validation_error

    @classmethod
    def _wrap_validation_error(cls, error: ValidationError) -> ConfigurationError:
        errors = error.errors(include_url=False)
        fields = sorted({_dotted(err) for err in errors if _dotted(err)})
        first = errors[0]
        where = _dotted(first) or "configuration"
        field_list = ", ".join(fields) if fields else "configuration"
        message = f"Invalid configuration for {field_list}: {where}: {first['msg']}."
        return ConfigurationError(message)


def _dotted(err: Mapping[str, object]) -> str:
    loc = err.get("loc")
    if not isinstance(loc, (list, tuple)):
        return ""
    return ".".join(str(part) for part in loc)


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        message = f"Cannot read config file {path}: {exc.strerror or exc}"
        raise ConfigurationError(message) from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        message = f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        raise ConfigurationError(message) from exc
    if not isinstance(payload, dict):
        message = f"{path}: top level must be a JSON object."
        raise ConfigurationError(message)
    return payload


def _apply_override(payload: dict[str, Any], override: str) -> None:
    """Set ``a.b.c=value``; the value is parsed as JSON, else kept as a string."""
    key, separator, raw = override.partition("=")
    parts = [part.strip() for part in key.split(".")]
    if not separator or not all(parts):
        message = f"Override '{override}' must look like section.field=value."
        raise ConfigurationError(message)
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    target = payload
    for part in parts[:-1]:
        child = target.setdefault(part, {})
        if not isinstance(child, dict):
            message = f"Override '{override}' descends into non-section '{part}'."
            raise ConfigurationError(message)
        target = child
    target[parts[-1]] = value


__all__ = [
    "CONFIG_ENV_VAR",
    "DatasetConfig",
    "GeometryConfig",
    "PathsConfig",
    "PlanConfig",
    "RunConfig",
]
