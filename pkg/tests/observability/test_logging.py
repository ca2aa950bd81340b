"""Tests for the logging observability module."""

import json
import logging  # noqa: TID251

import numpy as np
import structlog

from invertible_pai.observability.logging import (
    ArraySummaryProcessor,
    ensure_structlog_configured,
)


def test_small_arrays_are_inlined():
    processor = ArraySummaryProcessor(max_inline=4)
    result = processor(None, "", {"values": np.arange(3.0), "count": np.int64(2)})
    assert result == {"values": [0.0, 1.0, 2.0], "count": 2}


def test_large_arrays_are_summarized():
    processor = ArraySummaryProcessor(max_inline=4)
    result = processor(None, "", {"field": np.linspace(-1.0, 2.0, 10).reshape(2, 5)})
    assert result["field"] == {
        "shape": [2, 5],
        "dtype": "float64",
        "min": -1.0,
        "max": 2.0,
    }


def test_non_numeric_arrays_have_no_range():
    processor = ArraySummaryProcessor(max_inline=1)
    result = processor(None, "", {"mask": np.array(["a", "b"])})
    assert set(result["mask"]) == {"shape", "dtype"}


def test_ensure_configured_installs_the_summary(clean_structlog):
    ensure_structlog_configured()
    assert any(
        isinstance(p, ArraySummaryProcessor)
        for p in structlog.get_config()["processors"]
    )


def test_summary_can_be_disabled(clean_structlog):
    ensure_structlog_configured(summarize_arrays=False)
    assert not any(
        isinstance(p, ArraySummaryProcessor)
        for p in structlog.get_config()["processors"]
    )


def test_configuration_is_idempotent(clean_structlog):
    """A second call does not replace the first configuration."""
    ensure_structlog_configured(json_output=True)
    first = structlog.get_config()["processors"]
    ensure_structlog_configured(summarize_arrays=False)
    assert structlog.get_config()["processors"] == first


def test_json_output_goes_to_stderr(clean_structlog, capsys):
    ensure_structlog_configured(json_output=True, level=logging.DEBUG)
    structlog.get_logger("pai.test").info("unit.event", stage=1)
    captured = capsys.readouterr()
    assert captured.out == ""
    record = json.loads(captured.err.strip().splitlines()[-1])
    assert record["event"] == "unit.event"
    assert record["level"] == "info"
