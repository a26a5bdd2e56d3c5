"""Small dense/pooling/activation building blocks used by the CNN."""

from __future__ import annotations

import numpy as np


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def relu_grad(z: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, dout, 0.0)


def avgpool2(x: np.ndarray) -> np.ndarray:
    """2x2 average pooling, stride 2. Spatial dims must be even."""
    n, h, w, c = x.shape
    return x.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))


def avgpool2_grad(dout: np.ndarray) -> np.ndarray:
    """Backward of avgpool2: spread each gradient over its 2x2 window."""
    d = dout / 4.0
    return d.repeat(2, axis=1).repeat(2, axis=2)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(1, 2))


def global_avg_pool_grad(dout: np.ndarray, h: int, w: int) -> np.ndarray:
    scale = 1.0 / (h * w)
    return np.broadcast_to(dout[:, None, None, :] * scale, (dout.shape[0], h, w, dout.shape[1]))


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_input_grad(dout: np.ndarray, w: np.ndarray) -> np.ndarray:
    return dout @ w.T


def dense_param_grads(x: np.ndarray, dout: np.ndarray):
    return x.T @ dout, dout.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(logits: np.ndarray) -> np.ndarray:
    out = np.empty_like(logits)
    pos = logits >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    ez = np.exp(logits[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bilinear_resize(maps: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinearly resize (..., h, w) maps to (..., out_h, out_w).

    Uses half-pixel centers (the align_corners=False convention), so a 1x1
    map broadcasts to a constant.
    """
    h, w = maps.shape[-2], maps.shape[-1]
    if (h, w) == (out_h, out_w):
        return maps.copy()

    def axis_coords(n_in: int, n_out: int):
        scale = n_in / n_out
        src = (np.arange(n_out) + 0.5) * scale - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = maps[..., y0[:, None], x0[None, :]] * (1 - fx) + maps[..., y0[:, None], x1[None, :]] * fx
    bot = maps[..., y1[:, None], x0[None, :]] * (1 - fx) + maps[..., y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bot * fy
