"""Tests for stage checkpoints and resumable training."""

from __future__ import annotations

import numpy as np
import pytest

from invertible_pai.core.exceptions import DataIntegrityError, StorageError
from invertible_pai.data.checkpoints import (
    PLAN_NAME,
    CheckpointStore,
    flatten_params,
    unflatten_params,
)
from invertible_pai.inn.stage import init_params
from invertible_pai.unroll.optim import TrainConfig
from invertible_pai.unroll.training import EpochLoss, train_plan
from invertible_pai.wave.operator import WaveOperator


def test_flatten_round_trip(tiny_spec):
    params = init_params(tiny_spec, 4, output_scale=0.1)
    flat = flatten_params(params)
    assert flat.dtype == np.float64
    restored = unflatten_params(flat, tiny_spec)
    assert restored.fingerprint() == params.fingerprint()
    with pytest.raises(DataIntegrityError):
        unflatten_params(flat[:-1], tiny_spec)
    with pytest.raises(DataIntegrityError):
        unflatten_params(np.append(flat, 0.0), tiny_spec)


def test_save_and_load_stage(tmp_path, tiny_spec):
    store = CheckpointStore(tmp_path / "ckpt")
    params = init_params(tiny_spec, 1, output_scale=0.1)
    history = [EpochLoss(0, 0.5, 0.1), EpochLoss(1, 0.25, 0.2)]
    store.save_stage(0, params, scale=2.5, fingerprint="abc", history=history)
    assert store.has_stage(0, "abc")
    assert not store.has_stage(0, "abd")
    assert not store.has_stage(1, "abc")
    loaded, scale = store.load_stage(0, tiny_spec)
    assert loaded.fingerprint() == params.fingerprint()
    assert scale == 2.5
    lines = (tmp_path / "ckpt" / "loss_stage_0.txt").read_text().splitlines()
    assert [line.split()[0] for line in lines] == ["0", "1"]
    assert float(lines[1].split()[1]) == 0.25


def test_replacing_a_stage_drops_later_ones(tmp_path, tiny_spec):
    store = CheckpointStore(tmp_path)
    for index in range(3):
        store.save_stage(
            index, init_params(tiny_spec, index), scale=1.0, fingerprint=f"f{index}"
        )
    store.save_stage(1, init_params(tiny_spec, 9), scale=1.0, fingerprint="g1")
    manifest = store.read_manifest()
    assert manifest is not None
    assert [entry.index for entry in manifest.stages] == [0, 1]
    assert store.load_plan().n_stages == 2


def test_missing_stages(tmp_path, tiny_spec):
    store = CheckpointStore(tmp_path)
    with pytest.raises(StorageError):
        store.load_plan()
    store.save_stage(0, init_params(tiny_spec, 0), scale=1.0, fingerprint="x")
    with pytest.raises(StorageError):
        store.load_stage(1, tiny_spec)
    with pytest.raises(DataIntegrityError):
        store.load_plan(2)


def test_architecture_mismatch(tmp_path, tiny_spec):
    store = CheckpointStore(tmp_path)
    store.save_stage(0, init_params(tiny_spec, 0), scale=1.0, fingerprint="x")
    with pytest.raises(DataIntegrityError):
        store.load_stage(0, tiny_spec.model_copy(update={"hidden_channels": 6}))


def test_corrupted_checkpoint(tmp_path, tiny_spec):
    store = CheckpointStore(tmp_path)
    store.save_stage(0, init_params(tiny_spec, 0), scale=1.0, fingerprint="x")
    target = tmp_path / "stage_0.f64"
    raw = bytearray(target.read_bytes())
    raw[3] ^= 0x10
    target.write_bytes(bytes(raw))
    with pytest.raises(DataIntegrityError):
        store.load_plan()
    (tmp_path / PLAN_NAME).write_text("{")
    with pytest.raises(DataIntegrityError):
        store.read_manifest()


def test_resumed_training_skips_finished_stages(
    tmp_path, small_grid, small_geometry, small_samples, tiny_spec
):
    """A rerun with the same inputs reuses every stage and solves nothing."""
    cfg = TrainConfig(epochs_per_stage=1, batch_size=2)
    store = CheckpointStore(tmp_path)
    first_op = WaveOperator(small_grid, small_geometry)
    first = train_plan(
        small_samples, tiny_spec, cfg, 2, first_op, store=store, dataset_checksum="d"
    )
    assert first.resumed_stages == []
    assert first_op.counter.total == 6 * len(small_samples)

    second_op = WaveOperator(small_grid, small_geometry)
    second = train_plan(
        small_samples, tiny_spec, cfg, 2, second_op, store=store, dataset_checksum="d"
    )
    assert second.resumed_stages == [0, 1]
    assert second_op.counter.total == 0
    for ours, theirs in zip(second.plan.stages, first.plan.stages, strict=True):
        assert ours.fingerprint() == theirs.fingerprint()
    assert second.plan.stage_scales == first.plan.stage_scales

    third_op = WaveOperator(small_grid, small_geometry)
    third = train_plan(
        small_samples, tiny_spec, cfg, 2, third_op, store=store, dataset_checksum="e"
    )
    assert third.resumed_stages == []
