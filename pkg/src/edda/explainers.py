"""Saliency-map producers: Grad-CAM and vanilla gradient saliency.

Both methods return per-image min-max normalized maps in [0,1] at the
input's spatial resolution. A constant pre-normalization map normalizes
to all zeros so that an uninformative explanation occludes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigurationError
from .model import Model

GRADCAM = "gradcam"
VANILLA = "vanilla_saliency"
METHODS = (GRADCAM, VANILLA)


@dataclass(frozen=True)
class ExplainerSpec:
    """Selects a saliency method.

    target_layer applies to gradcam only; None means the model's last
    feature layer. signed_output skips Grad-CAM's rectification and is
    meant for heatmap rendering, never for masking or metrics.
    """

    method: str = GRADCAM
    target_layer: str | None = None
    signed_output: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown explainer method {self.method!r}")
        if self.signed_output and self.method != GRADCAM:
            raise ConfigurationError("signed_output applies to gradcam only")


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Scale each (..., H, W) map to [0,1]; constant maps become zeros."""
    lo = values.min(axis=(-2, -1), keepdims=True)
    hi = values.max(axis=(-2, -1), keepdims=True)
    span = hi - lo
    out = np.zeros_like(values, dtype=np.float64)
    np.divide(values - lo, span, out=out, where=span > 0)
    return out


def _resolve_layer(model: Model, layer: str | None) -> str:
    if layer is not None:
        return layer
    if not model.feature_layers:
        raise ConfigurationError("model has no feature layers for gradcam")
    return model.feature_layers[-1]


def gradcam_batch(
    model: Model,
    images: np.ndarray,
    class_index,
    layer: str | None = None,
    signed: bool = False,
) -> np.ndarray:
    """Grad-CAM maps for a batch, shaped (N, H, W).

    Per-channel weights are the spatial mean of the class-logit gradient
    at the layer; the weighted activation sum is rectified (unless
    signed), bilinearly upsampled to the input size, then normalized.
    """
    layer = _resolve_layer(model, layer)
    activations, grads = model.feature_gradients(images, class_index, layer)
    if activations.ndim != 4 or activations.shape[1] < 1 or activations.shape[2] < 1:
        raise ConfigurationError(f"layer {layer!r} has no spatial extent")
    weights = grads.mean(axis=(1, 2))
    cam = np.einsum("nhwc,nc->nhw", activations, weights)
    if not signed:
        cam = np.maximum(cam, 0.0)
    cam = nn.bilinear_resize(cam, images.shape[1], images.shape[2])
    return minmax_normalize(cam)


def vanilla_saliency_batch(model: Model, images: np.ndarray, class_index) -> np.ndarray:
    """Channel-max absolute input gradients, normalized, shaped (N, H, W)."""
    grads = model.input_gradients(images, class_index)
    return minmax_normalize(np.abs(grads).max(axis=-1))


def explain_batch(spec: ExplainerSpec, model: Model, images: np.ndarray, class_index) -> np.ndarray:
    if spec.method == GRADCAM:
        return gradcam_batch(model, images, class_index, spec.target_layer, spec.signed_output)
    return vanilla_saliency_batch(model, images, class_index)


def explain(spec: ExplainerSpec, model: Model, image: np.ndarray, class_index: int) -> np.ndarray:
    """Saliency map for one (H, W, C) image, shaped (H, W)."""
    image = np.asarray(image, dtype=np.float64)
    return explain_batch(spec, model, image[None], int(class_index))[0]


def gradcam_map(model: Model, image: np.ndarray, class_index: int, layer: str | None = None, signed: bool = False) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return gradcam_batch(model, image[None], int(class_index), layer, signed)[0]


def vanilla_saliency_map(model: Model, image: np.ndarray, class_index: int) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return vanilla_saliency_batch(model, image[None], int(class_index))[0]
