"""Masking primitives: threshold occlusion and keep-top-fraction retention."""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeMismatchError


def _check_sizes(image: np.ndarray, saliency: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    if image.ndim == 3 and saliency.ndim == 2:
        spatial_ok = image.shape[:2] == saliency.shape
    elif image.ndim == 4 and saliency.ndim == 3:
        spatial_ok = image.shape[:3] == saliency.shape
    else:
        raise ShapeMismatchError(
            f"expected (H, W, C) with (H, W) map or batches of each, got {image.shape} and {saliency.shape}"
        )
    if not spatial_ok:
        raise ShapeMismatchError(
            f"saliency size {saliency.shape} does not match image {image.shape}"
        )
    return image, saliency


def occlude_salient(image: np.ndarray, saliency: np.ndarray, tau: float) -> np.ndarray:
    """Zero every channel of each pixel whose saliency exceeds tau.

    Accepts a single (H, W, C) image with an (H, W) map or batches of
    each. The input is never mutated.
    """
    image, saliency = _check_sizes(image, saliency)
    return np.where((saliency > tau)[..., None], 0.0, image)


def keep_top_fraction(image: np.ndarray, saliency: np.ndarray, fraction: float) -> np.ndarray:
    """Retain exactly ceil(fraction * W * H) most-salient pixels, zero the rest.

    Ties break in favor of earlier row-major pixel positions. fraction
    must lie in (0, 1].
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    image, saliency = _check_sizes(image, saliency)
    single = image.ndim == 3
    if single:
        image = image[None]
        saliency = saliency[None]
    n, h, w = saliency.shape
    k = math.ceil(fraction * h * w)
    flat = saliency.reshape(n, h * w)
    # stable argsort on negated values: highest first, ties row-major
    order = np.argsort(-flat, axis=1, kind="stable")
    keep = np.zeros((n, h * w), dtype=bool)
    np.put_along_axis(keep, order[:, :k], True, axis=1)
    out = np.where(keep.reshape(n, h, w)[..., None], image, 0.0)
    return out[0] if single else out
