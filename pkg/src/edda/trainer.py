"""Training loop: per-batch augmentation followed by one SGD step.

Each mini-batch is first transformed by the configured strategy (EDDA,
a mixing baseline, or nothing) against the frozen current model, then a
single momentum-SGD step runs on the transformed batch. Shuffling and
augmentation draw from independent seeded streams so that augmentation
randomness never perturbs batch order.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .augmentation import (
    MASKED_SINGLE_LABEL,
    ORIGINAL,
    AugmentationConfig,
    AugmentedExample,
    edda_mc_batch,
    edda_ml_batch,
)
from . import nn
from .baselines import cutmix_batch, mixup_batch
from .errors import ConfigurationError
from .model import Model
from .types import MULTICLASS, MULTILABEL

STRATEGIES = ("none", "edda_mc", "edda_ml", "cutmix", "mixup")
MIXED = "mixed"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0001
    strategy: str = "none"
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    warmup_epochs: int = 1
    seed: int = 0
    standard_augmentation: bool = False
    mixing_alpha: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.warmup_epochs < 0:
            raise ConfigurationError("warmup_epochs must be non-negative")
        # warm-up only gates EDDA; it must leave at least one EDDA epoch
        if self.strategy in ("edda_mc", "edda_ml") and self.warmup_epochs >= self.epochs:
            raise ConfigurationError("warmup_epochs must be smaller than epochs")
        if self.mixing_alpha <= 0:
            raise ConfigurationError("mixing_alpha must be positive")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    examples_seen: int
    branch_counts: dict
    wall_time: float

    def to_record(self) -> dict:
        return asdict(self)


class SGD:
    """Momentum SGD; the weight-decay term joins the gradient before the
    momentum update, matching the common deep-learning formulation."""

    def __init__(self, params: dict, learning_rate: float, momentum: float, weight_decay: float):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        for name, value in params.items():
            g = grads[name] + self.weight_decay * value
            self.velocity[name] = self.momentum * self.velocity[name] + g
            value -= self.learning_rate * self.velocity[name]


def softmax_cross_entropy(logits: np.ndarray, soft_targets: np.ndarray):
    """Mean cross-entropy against soft target rows summing to 1.

    Returns (loss, dloss/dlogits) with the gradient already divided by
    the batch size.
    """
    n = logits.shape[0]
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    loss = float(np.mean(lse - (soft_targets * logits).sum(axis=1)))
    probs = np.exp(logits - lse[:, None])
    dlogits = (probs - soft_targets) / n
    return loss, dlogits


def masked_binary_cross_entropy(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray):
    """Per-class BCE averaged over unmasked entries.

    Entries with mask 0 contribute neither loss nor gradient, which is
    how single-class supervision of appended masked examples works.
    """
    total = mask.sum()
    if total == 0:
        raise ConfigurationError("loss mask excludes every entry")
    # stable elementwise BCE from logits
    elem = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    loss = float((elem * mask).sum() / total)
    dlogits = mask * (nn.sigmoid(logits) - targets) / total
    return loss, dlogits


def _standard_augment(images: np.ndarray, rng: np.random.Generator, pad: int = 2) -> np.ndarray:
    """Random horizontal flip plus random crop from a zero-padded canvas."""
    n, h, w, _ = images.shape
    out = images.copy()
    flips = rng.random(n) < 0.5
    out[flips] = out[flips, :, ::-1]
    padded = np.pad(out, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ys = rng.integers(0, 2 * pad + 1, size=n)
    xs = rng.integers(0, 2 * pad + 1, size=n)
    for i in range(n):
        out[i] = padded[i, ys[i] : ys[i] + h, xs[i] : xs[i] + w]
    return out


def _multiclass_arrays(examples: list, num_outputs: int):
    images = np.stack([ex.image for ex in examples])
    targets = np.zeros((len(examples), num_outputs))
    for i, ex in enumerate(examples):
        targets[i] = ex.target.one_hot(num_outputs)
    return images, targets


def _multilabel_arrays(examples: list, num_classes: int):
    images = np.stack([ex.image for ex in examples])
    targets = np.zeros((len(examples), num_classes))
    mask = np.ones((len(examples), num_classes))
    for i, ex in enumerate(examples):
        targets[i] = ex.target.label_vector
        if ex.provenance == MASKED_SINGLE_LABEL:
            mask[i] = 0.0
            mask[i, ex.masked_class] = 1.0
    return images, targets, mask


def _check_strategy(config: TrainConfig, model: Model) -> None:
    if config.strategy == "edda_mc" and model.task != MULTICLASS:
        raise ConfigurationError("edda_mc requires a multiclass model")
    if config.strategy == "edda_ml" and model.task != MULTILABEL:
        raise ConfigurationError("edda_ml requires a multilabel model")
    if config.strategy == "edda_mc" and config.augmentation.p > 0 and not model.background_enabled:
        raise ConfigurationError(
            "edda_mc with p > 0 needs a model built with the background class"
        )


def train(
    config: TrainConfig,
    dataset,
    model: Model,
    explain_fn=None,
    epoch_callback=None,
    log_path: str | None = None,
):
    """Run the full training loop; returns (model, list of EpochRecord).

    explain_fn overrides the explainer inside EDDA (the zero-map
    equivalence check relies on this seam). epoch_callback(record) fires
    after each epoch. log_path appends one JSON record per epoch.
    """
    _check_strategy(config, model)
    examples = list(getattr(dataset, "examples", dataset))
    if not examples:
        raise ConfigurationError("training dataset is empty")
    n = len(examples)

    shuffle_seq, aug_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    aug_rng = np.random.default_rng(aug_seq)
    optimizer = SGD(model.parameters(), config.learning_rate, config.momentum, config.weight_decay)

    aug_config = config.augmentation
    if config.strategy == "edda_mc" and model.background_enabled and not aug_config.background_enabled:
        aug_config = replace(aug_config, background_enabled=True)

    log_fh = open(log_path, "a", encoding="utf-8") if log_path else None
    records = []
    try:
        for epoch in range(config.epochs):
            start = time.perf_counter()
            order = shuffle_rng.permutation(n)
            loss_sum = 0.0
            acc_sum = 0.0
            acc_weight = 0.0
            examples_seen = 0
            branch_counts: dict[str, int] = {}

            for lo in range(0, n, config.batch_size):
                batch_idx = order[lo : lo + config.batch_size]
                batch = [examples[i] for i in batch_idx]
                if config.standard_augmentation:
                    stacked = np.stack([img for img, _ in batch])
                    stacked = _standard_augment(stacked, aug_rng)
                    batch = [(stacked[i], t) for i, (_, t) in enumerate(batch)]

                augmented = _apply_strategy(batch, model, config, aug_config, aug_rng, epoch, explain_fn)

                if model.task == MULTICLASS:
                    images, targets = _multiclass_arrays(augmented, model.num_outputs)
                    logits = model.logits_batch(images)
                    loss, dlogits = softmax_cross_entropy(logits, targets)
                    correct = np.argmax(logits, axis=1) == np.argmax(targets, axis=1)
                    acc_sum += float(correct.sum())
                    acc_weight += len(augmented)
                else:
                    images, targets, mask = _multilabel_arrays(augmented, model.num_classes)
                    logits = model.logits_batch(images)
                    loss, dlogits = masked_binary_cross_entropy(logits, targets, mask)
                    hits = ((logits >= 0.0) == (targets >= 0.5)) * mask
                    acc_sum += float(hits.sum())
                    acc_weight += float(mask.sum())

                grads = model.loss_backward(images, dlogits)
                optimizer.step(model.parameters(), grads)

                loss_sum += loss * len(augmented)
                examples_seen += len(augmented)
                for ex in augmented:
                    branch_counts[ex.provenance] = branch_counts.get(ex.provenance, 0) + 1

            record = EpochRecord(
                epoch=epoch,
                loss=loss_sum / examples_seen,
                accuracy=acc_sum / acc_weight if acc_weight else 0.0,
                examples_seen=examples_seen,
                branch_counts=branch_counts,
                wall_time=time.perf_counter() - start,
            )
            records.append(record)
            if log_fh:
                log_fh.write(json.dumps(record.to_record(), sort_keys=True) + "\n")
                log_fh.flush()
            if epoch_callback:
                epoch_callback(record)
    finally:
        if log_fh:
            log_fh.close()
    return model, records


def _apply_strategy(
    batch,
    model: Model,
    config: TrainConfig,
    aug_config: AugmentationConfig,
    aug_rng: np.random.Generator,
    epoch: int,
    explain_fn,
) -> list[AugmentedExample]:
    strategy = config.strategy
    if strategy in ("edda_mc", "edda_ml") and epoch < config.warmup_epochs:
        strategy = "none"
    if strategy == "none":
        return [AugmentedExample(np.asarray(img, dtype=np.float64), t, ORIGINAL) for img, t in batch]
    if strategy == "edda_mc":
        return edda_mc_batch(batch, model, aug_config, aug_rng, explain_fn=explain_fn)
    if strategy == "edda_ml":
        return edda_ml_batch(batch, model, aug_config, explain_fn=explain_fn)
    mixer = cutmix_batch if strategy == "cutmix" else mixup_batch
    width = model.num_outputs if model.task == MULTICLASS else model.num_classes
    mixed = mixer(batch, alpha=config.mixing_alpha, rng=aug_rng, num_classes=width)
    out = []
    for image, soft in mixed:
        out.append(AugmentedExample(image, _SoftTarget(soft, model.task), MIXED))
    return out


class _SoftTarget:
    """Adapter giving mixed soft vectors the Target surface the batch
    builders expect."""

    def __init__(self, vector: np.ndarray, task: str):
        self.vector = np.asarray(vector, dtype=np.float64)
        self.kind = task

    def one_hot(self, num_outputs: int) -> np.ndarray:
        if self.vector.shape[0] != num_outputs:
            out = np.zeros(num_outputs)
            out[: self.vector.shape[0]] = self.vector
            return out
        return self.vector

    @property
    def label_vector(self) -> np.ndarray:
        return self.vector


def read_run_log(path: str) -> list[dict]:
    """Load a JSON-lines run log written by train()."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def deterministic_trace(records) -> list[tuple]:
    """Project run records onto their seed-reproducible fields.

    Wall time always varies and provenance tags legitimately differ
    between strategies that train on identical data, so equivalence
    checks compare (loss, accuracy, examples_seen) per epoch.
    """
    out = []
    for r in records:
        if isinstance(r, EpochRecord):
            r = r.to_record()
        out.append((r["loss"], r["accuracy"], r["examples_seen"]))
    return out
