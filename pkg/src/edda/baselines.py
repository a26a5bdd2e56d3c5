"""MixUp and CutMix reference augmentations.

Both draw one Beta(alpha, alpha) lambda per example and pick partners
through a single random permutation, in that order, so a stub rng that
scripts .beta / .permutation / .integers can force any branch.
"""

from __future__ import annotations

import math

import numpy as np

from .types import Target


def _to_vectors(batch, num_classes: int | None):
    images = np.stack([np.asarray(img, dtype=np.float64) for img, _ in batch])
    targets = [t for _, t in batch]
    width = num_classes
    if width is None:
        indices = [t.class_index for t in targets if isinstance(t, Target) and t.kind == "multiclass"]
        width = max(indices) + 1 if indices else None
    vectors = []
    for t in targets:
        if isinstance(t, Target):
            if t.kind == "multiclass":
                vectors.append(t.one_hot(width))
            else:
                vectors.append(t.label_vector.astype(np.float64))
        else:
            vectors.append(np.asarray(t, dtype=np.float64))
    return images, np.stack(vectors)


def mixup_batch(batch, alpha: float = 1.0, rng: np.random.Generator | None = None, num_classes: int | None = None):
    """Convexly blend each example with a random partner.

    Returns a list of (image, soft target vector) pairs. One-hot targets
    mix into vectors that still sum to 1.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rng = rng if rng is not None else np.random.default_rng()
    images, vectors = _to_vectors(batch, num_classes)
    n = images.shape[0]
    lam = np.asarray(rng.beta(alpha, alpha, size=n), dtype=np.float64)
    partner = np.asarray(rng.permutation(n))
    lam_img = lam[:, None, None, None]
    mixed = lam_img * images + (1.0 - lam_img) * images[partner]
    soft = lam[:, None] * vectors + (1.0 - lam[:, None]) * vectors[partner]
    return [(mixed[i], soft[i]) for i in range(n)]


def cutmix_batch(batch, alpha: float = 1.0, rng: np.random.Generator | None = None, num_classes: int | None = None):
    """Paste a partner's rectangle into each image, mixing targets by area.

    The rectangle has side lengths W*sqrt(1-lambda) and H*sqrt(1-lambda)
    with a uniformly chosen center, clipped to the image; the target
    weight is the surviving original-pixel fraction.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rng = rng if rng is not None else np.random.default_rng()
    images, vectors = _to_vectors(batch, num_classes)
    n, h, w = images.shape[:3]
    lam = np.asarray(rng.beta(alpha, alpha, size=n), dtype=np.float64)
    partner = np.asarray(rng.permutation(n))
    cx = np.asarray(rng.integers(0, w, size=n))
    cy = np.asarray(rng.integers(0, h, size=n))

    out = []
    for i in range(n):
        cut_w = int(round(w * math.sqrt(max(0.0, 1.0 - lam[i]))))
        cut_h = int(round(h * math.sqrt(max(0.0, 1.0 - lam[i]))))
        x1 = max(int(cx[i]) - cut_w // 2, 0)
        x2 = min(int(cx[i]) + (cut_w - cut_w // 2), w)
        y1 = max(int(cy[i]) - cut_h // 2, 0)
        y2 = min(int(cy[i]) + (cut_h - cut_h // 2), h)
        area = max(0, x2 - x1) * max(0, y2 - y1)
        lam_adj = 1.0 - area / (w * h)
        image = images[i].copy()
        if area > 0:
            image[y1:y2, x1:x2] = images[partner[i], y1:y2, x1:x2]
        soft = lam_adj * vectors[i] + (1.0 - lam_adj) * vectors[partner[i]]
        out.append((image, soft))
    return out
