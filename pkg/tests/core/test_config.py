"""Tests for the run configuration."""

from __future__ import annotations

import json
import os
from unittest import mock

import pytest

from invertible_pai import exceptions
from invertible_pai.core.config import RunConfig
from invertible_pai.core.exceptions import ConfigurationError
from invertible_pai.wave.grid import SubsampleScheme


@pytest.fixture(autouse=True)
def clean_environment():
    with mock.patch.dict(os.environ, {}, clear=True):
        yield


def _write(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload) if not isinstance(payload, str) else payload)
    return path


def test_defaults_are_consistent():
    config = RunConfig.from_sources()
    assert config.grid.nx == 64
    assert config.geometry.subsample_factor == 4
    assert config.geometry.scheme is SubsampleScheme.TOTAL
    assert config.architecture.ndim == 2
    assert config.plan.n_stages == 1
    assert config.threads == 1


def test_file_then_overrides(tmp_path):
    """Overrides win over the file; untouched fields keep their defaults."""
    path = _write(tmp_path, {"grid": {"nt": 64}, "plan": {"n_stages": 3}})
    config = RunConfig.from_sources(path, ["plan.n_stages=5", "noise.snr_db=20.5"])
    assert config.grid.nt == 64
    assert config.grid.nx == 64
    assert config.plan.n_stages == 5
    assert config.noise.snr_db == 20.5


def test_string_override_values():
    config = RunConfig.from_sources(
        overrides=["geometry.scheme=per_axis", "paths.dataset=runs/a"]
    )
    assert config.geometry.scheme is SubsampleScheme.PER_AXIS
    assert str(config.paths.dataset) == "runs/a"


def test_environment_variables():
    with mock.patch.dict(os.environ, {"PAI_THREADS": "3", "PAI_GRID__NT": "40"}):
        config = RunConfig.from_sources()
    assert config.threads == 3
    assert config.grid.nt == 40


def test_config_path_from_environment(tmp_path):
    path = _write(tmp_path, {"seed": 9})
    with mock.patch.dict(os.environ, {"PAI_CONFIG": str(path)}):
        assert RunConfig.from_sources().seed == 9


def test_malformed_json_reports_position(tmp_path):
    path = _write(tmp_path, '{\n  "seed": 1,\n  oops\n}')
    with pytest.raises(ConfigurationError) as exc_info:
        RunConfig.from_sources(path)
    assert f"{path}:3:" in str(exc_info.value)
    assert exc_info.value.exit_code == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="Cannot read config file"):
        RunConfig.from_sources(tmp_path / "absent.json")


def test_top_level_must_be_an_object(tmp_path):
    with pytest.raises(ConfigurationError, match="JSON object"):
        RunConfig.from_sources(_write(tmp_path, [1, 2]))


@pytest.mark.parametrize(
    ("override", "field"),
    [
        ("grid.unknown=1", "grid.unknown"),
        ("bogus=1", "bogus"),
        ("training.learning_rate=-1", "training.learning_rate"),
        ("plan.n_stages=0", "plan.n_stages"),
    ],
)
def test_invalid_values_name_the_field(override, field):
    with pytest.raises(ConfigurationError) as exc_info:
        RunConfig.from_sources(overrides=[override])
    assert field in str(exc_info.value)


@pytest.mark.parametrize("override", ["no_equals_sign", ".=1", "seed.inner=1"])
def test_malformed_overrides(override):
    with pytest.raises(ConfigurationError):
        RunConfig.from_sources(overrides=[override])


def test_unstable_time_step_is_rejected():
    with pytest.raises(ConfigurationError, match="CFL"):
        RunConfig.from_sources(overrides=["grid.dt=1e-7"])


def test_acquisition_must_fit_the_grid():
    with pytest.raises(ConfigurationError):
        RunConfig.from_sources(overrides=["geometry.subsample_factor=128"])


def test_network_dimension_follows_the_grid():
    config = RunConfig.from_sources(
        overrides=[
            "grid.ny=16",
            "grid.nx=16",
            "grid.nz=16",
            "grid.sponge_width=2",
            "architecture.depth=4",
        ]
    )
    assert config.grid.ndim == 3
    assert config.architecture.ndim == 3
    with pytest.raises(ConfigurationError, match="contradicts"):
        RunConfig.from_sources(overrides=["architecture.ndim=3"])


def test_errors_carry_exit_codes():
    """The public error classes map onto the CLI exit-code table."""
    assert exceptions.ConfigurationError("x").exit_code == 2
    assert exceptions.StorageError("x").exit_code == 3
    assert exceptions.DataIntegrityError("x").exit_code == 1
    assert exceptions.NumericalError("x").exit_code == 4
    assert issubclass(exceptions.ShapeMismatchError, ValueError)
