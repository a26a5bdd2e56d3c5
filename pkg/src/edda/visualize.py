"""Heatmap overlay rendering: diverging colormap blended onto the input.

PNG is the only supported raster format so outputs stay bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

BLUE = np.array([0.0, 0.0, 1.0])
WHITE = np.array([1.0, 1.0, 1.0])
RED = np.array([1.0, 0.0, 0.0])


def diverging_colormap(values: np.ndarray) -> np.ndarray:
    """Map [0,1] values to blue -> white -> red, shaped (..., 3)."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)[..., None]
    low = BLUE + (WHITE - BLUE) * (2.0 * v)
    high = WHITE + (RED - WHITE) * (2.0 * v - 1.0)
    return np.where(v < 0.5, low, high)


def overlay_heatmap(image: np.ndarray, saliency: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Alpha-blend the saliency colormap onto an (H, W, C) image in [0,1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape[-1] == 1:
        image = np.repeat(image, 3, axis=-1)
    heat = diverging_colormap(saliency)
    return (1.0 - alpha) * image + alpha * heat


def save_png(path: str, image: np.ndarray) -> None:
    """Write an (H, W, 3) float image in [0,1] as PNG."""
    data = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_image(path: str) -> np.ndarray:
    """Read any Pillow-supported raster into a float64 RGB array in [0,1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.float64) / 255.0
