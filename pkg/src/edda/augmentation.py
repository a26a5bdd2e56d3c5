"""Explanation-driven augmentation for multiclass and multilabel training.

Both entry points take a mini-batch and a frozen model snapshot, explain
each relevant (image, class) pair, occlude the salient region, and decide
from the re-prediction whether the masked image enters training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError
from .explainers import ExplainerSpec, explain_batch
from .model import Model
from .occlusion import occlude_salient
from .types import MULTICLASS, MULTILABEL, Target

ORIGINAL = "original"
MASKED_ORIGINAL_LABEL = "masked_original_label"
MASKED_BACKGROUND_LABEL = "masked_background_label"
MASKED_SINGLE_LABEL = "masked_single_label"


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs shared by both augmentation modes.

    tau is the occlusion threshold, p the probability of adopting a
    misclassified masked image under the background label, and
    positive_threshold the multilabel positive-prediction cutoff.
    """

    tau: float = 0.5
    p: float = 0.0
    explainer: ExplainerSpec = field(default_factory=ExplainerSpec)
    background_enabled: bool = False
    positive_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError(f"tau must be in [0, 1], got {self.tau}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 < self.positive_threshold < 1.0:
            raise ConfigurationError(
                f"positive_threshold must be in (0, 1), got {self.positive_threshold}"
            )


@dataclass
class AugmentedExample:
    """One (image, target) pair destined for training.

    provenance records which branch produced it; masked_class is the
    single supervised class for masked_single_label examples and
    source_index points back at the input example.
    """

    image: np.ndarray
    target: Target
    provenance: str = ORIGINAL
    masked_class: int | None = None
    source_index: int | None = None


def _stack_batch(batch, expected_kind: str):
    if not batch:
        raise ShapeMismatchError("batch must not be empty")
    images = []
    targets = []
    for image, target in batch:
        if target.kind != expected_kind:
            raise ConfigurationError(
                f"expected {expected_kind} targets, got {target.kind}"
            )
        images.append(np.asarray(image, dtype=np.float64))
        targets.append(target)
    return np.stack(images), targets


def edda_mc_batch(
    batch,
    model: Model,
    config: AugmentationConfig,
    rng: np.random.Generator,
    explain_fn=None,
) -> list[AugmentedExample]:
    """Multiclass augmentation pass over one mini-batch.

    Per example: explain the ground-truth class, occlude, re-predict.
    A correct masked prediction adopts (masked, original label); a wrong
    one adopts (masked, background label) with probability p and falls
    back to the untouched original otherwise. Output length always
    equals input length.

    explain_fn(model, images, class_indices) -> (N, H, W) maps overrides
    the configured explainer when given.
    """
    if model.task != MULTICLASS:
        raise ConfigurationError("edda_mc_batch requires a multiclass model")
    images, targets = _stack_batch(batch, MULTICLASS)
    labels = np.array([t.class_index for t in targets], dtype=np.int64)
    if explain_fn is None:
        saliency = explain_batch(config.explainer, model, images, labels)
    else:
        saliency = np.asarray(explain_fn(model, images, labels), dtype=np.float64)
    masked = occlude_salient(images, saliency, config.tau)
    predicted = np.argmax(model.predict_batch(masked), axis=1)

    out = []
    for i, target in enumerate(targets):
        if predicted[i] == labels[i]:
            out.append(AugmentedExample(masked[i], target, MASKED_ORIGINAL_LABEL, source_index=i))
            continue
        if rng.random() < config.p:
            if not config.background_enabled:
                raise ConfigurationError(
                    "background branch reached with background_enabled=False; "
                    "set p=0 or enable the background class"
                )
            background = Target.multiclass(model.num_classes)
            out.append(AugmentedExample(masked[i], background, MASKED_BACKGROUND_LABEL, source_index=i))
        else:
            out.append(AugmentedExample(images[i], target, ORIGINAL, source_index=i))
    return out


def edda_ml_batch(
    batch,
    model: Model,
    config: AugmentationConfig,
    explain_fn=None,
) -> list[AugmentedExample]:
    """Multilabel augmentation pass over one mini-batch.

    All originals pass through unchanged. For every true-positive class z
    of an example (score >= positive_threshold and label 1), the class-z
    explanation is occluded and the image re-scored; if class z survives
    the cutoff the masked image is appended with a single-label target on
    z, supervised only on that class.
    """
    if model.task != MULTILABEL:
        raise ConfigurationError("edda_ml_batch requires a multilabel model")
    images, targets = _stack_batch(batch, MULTILABEL)
    scores = model.predict_batch(images)

    out = [
        AugmentedExample(images[i], targets[i], ORIGINAL, source_index=i)
        for i in range(len(targets))
    ]

    pairs = []
    for i, target in enumerate(targets):
        for z in target.positive_classes():
            if scores[i, z] >= config.positive_threshold:
                pairs.append((i, z))
    if not pairs:
        return out

    idx = np.array([i for i, _ in pairs], dtype=np.int64)
    cls = np.array([z for _, z in pairs], dtype=np.int64)
    stacked = images[idx]
    if explain_fn is None:
        saliency = explain_batch(config.explainer, model, stacked, cls)
    else:
        saliency = np.asarray(explain_fn(model, stacked, cls), dtype=np.float64)
    masked = occlude_salient(stacked, saliency, config.tau)
    masked_scores = model.predict_batch(masked)

    num_classes = model.num_classes
    for row, (i, z) in enumerate(pairs):
        if masked_scores[row, z] >= config.positive_threshold:
            vector = np.zeros(num_classes, dtype=np.int8)
            vector[z] = 1
            out.append(
                AugmentedExample(
                    masked[row],
                    Target.multilabel(vector),
                    MASKED_SINGLE_LABEL,
                    masked_class=int(z),
                    source_index=i,
                )
            )
    return out
