"""Optimizer, losses, the training loop, checkpoints, and run configs."""

import io
import json

import numpy as np
import pytest
from scipy.special import expit, logsumexp

from edda.augmentation import AugmentationConfig
from edda.checkpoint import (
    checkpoint_provenance,
    load_checkpoint,
    save_checkpoint,
)
from edda.config import ModelConfig, RunPlan, build_model, load_config, plan_from_dict, write_config
from edda.datasets import DatasetSpec, generate_synthetic
from edda.errors import ConfigurationError, FormatError
from edda.explainers import VANILLA, ExplainerSpec
from edda.model import ConvNet, LinearModel
from edda.trainer import (
    SGD,
    TrainConfig,
    deterministic_trace,
    masked_binary_cross_entropy,
    read_run_log,
    softmax_cross_entropy,
    train,
)
from edda.types import MULTICLASS, MULTILABEL

from oracles import fd_gradient


# ---------------------------------------------------------------- optimizer


def test_sgd_two_steps_match_hand_computation():
    params = {"w": np.array([1.0])}
    opt = SGD(params, learning_rate=0.1, momentum=0.9, weight_decay=0.0)
    opt.step(params, {"w": np.array([1.0])})
    assert params["w"][0] == pytest.approx(0.9)
    opt.step(params, {"w": np.array([1.0])})
    # velocity 0.9*1 + 1 = 1.9, weight 0.9 - 0.19
    assert params["w"][0] == pytest.approx(0.71)


def test_sgd_weight_decay_joins_gradient_before_momentum():
    params = {"w": np.array([1.0])}
    opt = SGD(params, learning_rate=0.1, momentum=0.0, weight_decay=0.1)
    opt.step(params, {"w": np.array([1.0])})
    assert params["w"][0] == pytest.approx(1.0 - 0.1 * 1.1)
    opt.step(params, {"w": np.array([1.0])})
    assert params["w"][0] == pytest.approx(0.89 - 0.1 * (1.0 + 0.1 * 0.89))


# -------------------------------------------------------------------- losses


def test_cross_entropy_matches_scipy_formula():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(5, 4)) * 3
    targets = rng.dirichlet(np.ones(4), size=5)
    loss, _ = softmax_cross_entropy(logits, targets)
    want = np.mean(logsumexp(logits, axis=1) - (targets * logits).sum(axis=1))
    assert loss == pytest.approx(float(want), rel=1e-12)


def test_cross_entropy_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(3, 4))
    targets = rng.dirichlet(np.ones(4), size=3)
    _, dlogits = softmax_cross_entropy(logits, targets)
    fd = fd_gradient(lambda z: softmax_cross_entropy(z, targets)[0], logits, step=1e-5)
    assert np.allclose(dlogits, fd, atol=1e-7)


def test_cross_entropy_survives_large_logits():
    logits = np.array([[1000.0, 0.0], [-1000.0, 0.0]])
    targets = np.array([[1.0, 0.0], [0.0, 1.0]])
    loss, dlogits = softmax_cross_entropy(logits, targets)
    assert np.isfinite(loss)
    assert np.all(np.isfinite(dlogits))


def test_masked_bce_matches_elementwise_formula():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(4, 3)) * 2
    targets = (rng.random((4, 3)) < 0.5).astype(np.float64)
    mask = (rng.random((4, 3)) < 0.7).astype(np.float64)
    loss, _ = masked_binary_cross_entropy(logits, targets, mask)
    p = expit(logits)
    elem = -(targets * np.log(p) + (1 - targets) * np.log1p(-p))
    want = (elem * mask).sum() / mask.sum()
    assert loss == pytest.approx(float(want), rel=1e-9)


def test_masked_bce_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(3, 2))
    targets = (rng.random((3, 2)) < 0.5).astype(np.float64)
    mask = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    _, dlogits = masked_binary_cross_entropy(logits, targets, mask)
    fd = fd_gradient(
        lambda z: masked_binary_cross_entropy(z, targets, mask)[0], logits, step=1e-5
    )
    assert np.allclose(dlogits, fd, atol=1e-7)
    # masked entries get exactly zero gradient
    assert np.all(dlogits[mask == 0.0] == 0.0)


def test_masked_bce_survives_extreme_logits():
    logits = np.array([[800.0, -800.0]])
    targets = np.array([[1.0, 0.0]])
    mask = np.ones_like(logits)
    loss, dlogits = masked_binary_cross_entropy(logits, targets, mask)
    assert np.isfinite(loss)
    assert np.all(np.isfinite(dlogits))


def test_masked_bce_rejects_all_masked():
    with pytest.raises(ConfigurationError):
        masked_binary_cross_entropy(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))


# ------------------------------------------------------------------ training


def _mc_data(n=30, size=16, seed=0):
    return generate_synthetic(
        DatasetSpec(source="synthetic_mc", num_examples=n, image_size=size, seed=seed)
    )


def _ml_data(n=24, size=32, seed=0):
    return generate_synthetic(
        DatasetSpec(
            source="synthetic_ml", num_examples=n, image_size=size, seed=seed, task=MULTILABEL
        )
    )


def _linear(data, seed=0, background=False):
    return LinearModel(
        (data.image_size, data.image_size, data.channels),
        num_classes=data.num_classes,
        task=data.task,
        background_enabled=background,
        seed=seed,
    )


def test_loss_decreases_on_plain_training():
    data = _mc_data()
    model = _linear(data)
    _, records = train(TrainConfig(epochs=6, batch_size=10, strategy="none", seed=0), data, model)
    assert len(records) == 6
    assert records[-1].loss < records[0].loss
    assert all(r.examples_seen == len(data) for r in records)
    assert all(0.0 <= r.accuracy <= 1.0 for r in records)


def test_branch_counts_sum_to_examples_seen():
    data = _mc_data(n=20)
    model = _linear(data, background=True)
    config = TrainConfig(
        epochs=2,
        batch_size=8,
        strategy="edda_mc",
        warmup_epochs=1,
        seed=1,
        augmentation=AugmentationConfig(
            p=0.5, background_enabled=True, explainer=ExplainerSpec(VANILLA)
        ),
    )
    _, records = train(config, data, model)
    assert records[0].branch_counts == {"original": 20}
    counts = records[1].branch_counts
    assert sum(counts.values()) == records[1].examples_seen == 20
    allowed = {"original", "masked_original_label", "masked_background_label"}
    assert set(counts) <= allowed


def test_multilabel_training_appends_and_stays_bounded():
    data = _ml_data()
    model = _linear(data)
    config = TrainConfig(
        epochs=2,
        batch_size=8,
        strategy="edda_ml",
        warmup_epochs=0,
        seed=0,
        augmentation=AugmentationConfig(explainer=ExplainerSpec(VANILLA)),
    )
    _, records = train(config, data, model)
    for record in records:
        counts = record.branch_counts
        assert counts["original"] == len(data)
        extra = counts.get("masked_single_label", 0)
        assert record.examples_seen == len(data) + extra
        assert extra <= len(data) * data.num_classes


def test_augmentation_call_does_not_touch_parameters():
    # the strategy runs against the frozen current model; a parameter
    # change inside the augmentation pass would corrupt the SGD step
    from edda.augmentation import edda_mc_batch

    data = _mc_data(n=8)
    model = _linear(data, background=True)
    before = {k: v.copy() for k, v in model.parameters().items()}
    edda_mc_batch(
        data.examples,
        model,
        AugmentationConfig(p=1.0, background_enabled=True, explainer=ExplainerSpec(VANILLA)),
        np.random.default_rng(0),
    )
    after = model.parameters()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_strategy_and_task_mismatches_rejected():
    mc = _mc_data(n=6)
    ml = _ml_data(n=6)
    with pytest.raises(ConfigurationError):
        train(
            TrainConfig(epochs=2, strategy="edda_mc", warmup_epochs=0),
            ml,
            _linear(ml),
        )
    with pytest.raises(ConfigurationError):
        train(
            TrainConfig(epochs=2, strategy="edda_ml", warmup_epochs=0),
            mc,
            _linear(mc),
        )
    with pytest.raises(ConfigurationError, match="background"):
        train(
            TrainConfig(
                epochs=2,
                strategy="edda_mc",
                warmup_epochs=0,
                augmentation=AugmentationConfig(p=0.5),
            ),
            mc,
            _linear(mc, background=False),
        )


def test_warmup_must_leave_edda_epochs():
    with pytest.raises(ConfigurationError):
        TrainConfig(epochs=3, strategy="edda_mc", warmup_epochs=3)
    # non-EDDA strategies ignore warm-up entirely
    TrainConfig(epochs=3, strategy="none", warmup_epochs=5)


def test_train_config_validation():
    for bad in (
        dict(strategy="sorcery"),
        dict(batch_size=0),
        dict(epochs=0),
        dict(warmup_epochs=-1),
        dict(mixing_alpha=0.0),
    ):
        with pytest.raises(ConfigurationError):
            TrainConfig(**bad)


def test_identical_seeds_give_identical_runs(tmp_path):
    data = _mc_data(n=20)

    def run(path):
        model = _linear(data, seed=3)
        _, records = train(
            TrainConfig(epochs=3, batch_size=8, strategy="mixup", seed=7),
            data,
            model,
            log_path=str(path),
        )
        return model, records

    model_a, rec_a = run(tmp_path / "a.jsonl")
    model_b, rec_b = run(tmp_path / "b.jsonl")
    assert deterministic_trace(rec_a) == deterministic_trace(rec_b)
    assert all(
        np.array_equal(model_a.parameters()[k], model_b.parameters()[k])
        for k in model_a.parameters()
    )
    rows_a = read_run_log(str(tmp_path / "a.jsonl"))
    rows_b = read_run_log(str(tmp_path / "b.jsonl"))
    assert deterministic_trace(rows_a) == deterministic_trace(rows_b)
    assert [r["epoch"] for r in rows_a] == [0, 1, 2]


def test_different_seed_changes_the_run():
    data = _mc_data(n=20)
    model_a = _linear(data, seed=3)
    model_b = _linear(data, seed=3)
    _, rec_a = train(TrainConfig(epochs=2, batch_size=8, seed=0), data, model_a)
    _, rec_b = train(TrainConfig(epochs=2, batch_size=8, seed=1), data, model_b)
    assert deterministic_trace(rec_a) != deterministic_trace(rec_b)


def test_zero_saliency_edda_collapses_to_plain_training():
    # a saliency map of zeros never crosses tau, so every emitted image
    # equals its original and the parameter trajectory must match "none"
    data = _mc_data(n=20)

    def zero_maps(model, images, classes):
        return np.zeros(images.shape[:3])

    model_plain = _linear(data, seed=5)
    _, rec_plain = train(
        TrainConfig(epochs=2, batch_size=8, strategy="none", seed=9), data, model_plain
    )
    model_edda = _linear(data, seed=5)
    _, rec_edda = train(
        TrainConfig(epochs=2, batch_size=8, strategy="edda_mc", warmup_epochs=0, seed=9),
        data,
        model_edda,
        explain_fn=zero_maps,
    )
    assert deterministic_trace(rec_plain) == deterministic_trace(rec_edda)
    assert all(
        np.array_equal(model_plain.parameters()[k], model_edda.parameters()[k])
        for k in model_plain.parameters()
    )


def test_standard_augmentation_runs_and_keeps_count():
    data = _mc_data(n=12)
    model = _linear(data)
    _, records = train(
        TrainConfig(epochs=2, batch_size=6, standard_augmentation=True, seed=0), data, model
    )
    assert all(r.examples_seen == 12 for r in records)


def test_epoch_callback_fires_per_epoch():
    data = _mc_data(n=10)
    seen = []
    train(
        TrainConfig(epochs=3, batch_size=5, seed=0),
        data,
        _linear(data),
        epoch_callback=lambda r: seen.append(r.epoch),
    )
    assert seen == [0, 1, 2]


def test_empty_dataset_rejected():
    with pytest.raises(ConfigurationError):
        train(TrainConfig(epochs=1), [], _linear(_mc_data(n=2)))


# --------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    data = _mc_data(n=10)
    model = ConvNet((16, 16, 3), num_classes=3, task=MULTICLASS, seed=4)
    train(TrainConfig(epochs=1, batch_size=5, seed=0), data, model)
    path = str(tmp_path / "model.npz")
    save_checkpoint(model, path, provenance={"strategy": "none", "note": "smoke"})
    loaded = load_checkpoint(path)
    probe = np.stack([img for img, _ in data.examples[:4]])
    assert np.array_equal(loaded.predict_batch(probe), model.predict_batch(probe))
    assert loaded.task == model.task
    assert loaded.num_classes == model.num_classes
    assert loaded.channels == model.channels
    assert checkpoint_provenance(path) == {"strategy": "none", "note": "smoke"}


def test_checkpoint_round_trip_linear_background(tmp_path):
    model = LinearModel((8, 8, 1), num_classes=2, task=MULTICLASS, background_enabled=True, seed=1)
    path = str(tmp_path / "lin.npz")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.background_enabled
    assert loaded.num_outputs == 3
    probe = np.random.default_rng(0).random((2, 8, 8, 1))
    assert np.array_equal(loaded.logits_batch(probe), model.logits_batch(probe))


def test_corrupted_checkpoint_rejected(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"this is not a checkpoint")
    with pytest.raises(FormatError, match="unreadable"):
        load_checkpoint(str(path))


def test_checkpoint_missing_metadata_rejected(tmp_path):
    path = tmp_path / "nometa.npz"
    buffer = io.BytesIO()
    np.savez(buffer, param_w=np.zeros(3))
    path.write_bytes(buffer.getvalue())
    with pytest.raises(FormatError, match="metadata"):
        load_checkpoint(str(path))


def test_checkpoint_version_mismatch_rejected(tmp_path):
    path = tmp_path / "future.npz"
    buffer = io.BytesIO()
    np.savez(buffer, __meta__=json.dumps({"format_version": 99}))
    path.write_bytes(buffer.getvalue())
    with pytest.raises(FormatError, match="version"):
        load_checkpoint(str(path))


# -------------------------------------------------------------------- config


def _plan_dict():
    return {
        "dataset": {"source": "synthetic_mc", "num_examples": 30, "image_size": 16, "seed": 2},
        "model": {"architecture": "convnet", "channels": [4, 8, 8]},
        "train": {
            "epochs": 2,
            "batch_size": 10,
            "strategy": "edda_mc",
            "warmup_epochs": 1,
            "augmentation": {"p": 0.3, "explainer": {"method": "gradcam"}},
        },
    }


def test_config_round_trip(tmp_path):
    plan = plan_from_dict(_plan_dict())
    path = str(tmp_path / "run.json")
    write_config(plan, path)
    assert load_config(path) == plan
    assert plan.train.augmentation.p == 0.3
    assert plan.train.augmentation.explainer.method == "gradcam"
    assert plan.model.channels == (4, 8, 8)


def test_config_rejects_unknown_keys_by_name():
    raw = _plan_dict()
    raw["train"]["learnig_rate"] = 0.1
    with pytest.raises(ConfigurationError, match="train.learnig_rate"):
        plan_from_dict(raw)
    raw = _plan_dict()
    raw["train"]["augmentation"]["tua"] = 0.5
    with pytest.raises(ConfigurationError, match="train.augmentation.tua"):
        plan_from_dict(raw)
    raw = _plan_dict()
    raw["extra"] = {}
    with pytest.raises(ConfigurationError, match="extra"):
        plan_from_dict(raw)


def test_config_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    with pytest.raises(ConfigurationError, match="JSON"):
        load_config(str(path))


def test_build_model_infers_background_from_strategy():
    plan = plan_from_dict(_plan_dict())
    data = generate_synthetic(plan.dataset)
    model = build_model(plan, data)
    assert model.background_enabled
    assert model.num_outputs == 4

    raw = _plan_dict()
    raw["train"]["augmentation"]["p"] = 0.0
    no_bg = build_model(plan_from_dict(raw), data)
    assert not no_bg.background_enabled

    raw = _plan_dict()
    raw["model"]["background_enabled"] = True
    raw["train"] = {"strategy": "none"}
    forced = build_model(plan_from_dict(raw), data)
    assert forced.background_enabled


def test_build_model_linear():
    raw = _plan_dict()
    raw["model"] = {"architecture": "linear"}
    raw["train"] = {"strategy": "none"}
    plan = plan_from_dict(raw)
    data = generate_synthetic(plan.dataset)
    model = build_model(plan, data)
    assert model.architecture == "linear"
    assert model.input_shape == (16, 16, 3)
