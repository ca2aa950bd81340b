"""Tests for per-stage training records."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.inn.stage import init_params
from invertible_pai.unroll.plan import ReconstructionPlan
from invertible_pai.unroll.records import make_stage_dataset


@pytest.mark.parametrize("frozen_stages", [0, 2])
def test_record_solve_accounting(
    small_operator, small_samples, tiny_spec, frozen_stages
):
    """Stage i records cost 2N(i + 1) solves, 2(i + 1) per sample."""
    plan = None
    if frozen_stages:
        plan = ReconstructionPlan.identity(tiny_spec, frozen_stages)
    records = make_stage_dataset(
        small_samples,
        plan,
        small_operator,
        memory_channels=tiny_spec.n_channels - 1,
        dtype=tiny_spec.dtype,
    )
    n = len(small_samples)
    assert small_operator.counter.total == 2 * n * (frozen_stages + 1)
    per_sample = 2 * (frozen_stages + 1)
    assert [record.solves.total for record in records] == [per_sample] * n
    assert all(record.stage_index == frozen_stages for record in records)


def test_stage_zero_records_start_from_zero(small_operator, small_samples):
    """Without frozen stages the input is x_0 = 0, s_0 = 0."""
    records = make_stage_dataset(
        small_samples, None, small_operator, memory_channels=3, dtype=np.float64
    )
    for record, (truth, y_obs) in zip(records, small_samples, strict=True):
        assert not record.x.values.any()
        assert not record.s.any()
        assert record.s.shape == (3, *small_operator.grid.spatial_shape)
        assert record.ground_truth is truth
        expected = -small_operator.adjoint(y_obs).values
        np.testing.assert_allclose(record.gradient.values, expected, atol=1e-12)


def test_thread_count_does_not_change_records(
    small_operator, small_samples, tiny_spec
):
    """Order and contents are the same for one or several workers."""
    plan = ReconstructionPlan((init_params(tiny_spec, 21, output_scale=0.05),))
    serial = make_stage_dataset(
        small_samples, plan, small_operator, memory_channels=3, dtype=np.float64
    )
    parallel = make_stage_dataset(
        small_samples,
        plan,
        small_operator,
        memory_channels=3,
        dtype=np.float64,
        threads=3,
    )
    assert [r.sample_id for r in parallel] == list(range(len(small_samples)))
    for first, second in zip(serial, parallel, strict=True):
        assert first.gradient.values.tobytes() == second.gradient.values.tobytes()
        assert first.s.tobytes() == second.s.tobytes()
