"""Pure-numpy convolution kernels (fallback backend).

Each 3x3 (or KxK) same-padding, stride-1 convolution is computed as K*K
shifted GEMMs against the zero-padded input, which keeps everything inside
BLAS without materializing an im2col buffer.
"""

from __future__ import annotations

import numpy as np


def _pad(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padding stride-1 cross-correlation. x: (N,H,W,Ci), w: (KH,KW,Ci,Co)."""
    n, h, wd, _ = x.shape
    kh, kw, _, co = w.shape
    xp = _pad(x, kh // 2, kw // 2)
    out = np.broadcast_to(b, (n, h, wd, co)).copy()
    for ky in range(kh):
        for kx in range(kw):
            patch = xp[:, ky:ky + h, kx:kx + wd, :]
            out += patch @ w[ky, kx]
    return out


def conv2d_input_grad(dout: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient of conv2d_forward w.r.t. its input."""
    n, h, wd, _ = dout.shape
    kh, kw, ci, _ = w.shape
    ph, pw = kh // 2, kw // 2
    dxp = np.zeros((n, h + 2 * ph, wd + 2 * pw, ci), dtype=dout.dtype)
    for ky in range(kh):
        for kx in range(kw):
            dxp[:, ky:ky + h, kx:kx + wd, :] += dout @ w[ky, kx].T
    return dxp[:, ph:ph + h, pw:pw + wd, :]


def conv2d_param_grads(x: np.ndarray, dout: np.ndarray, kh: int = 3, kw: int = 3):
    """Gradients of conv2d_forward w.r.t. weights and bias."""
    n, h, wd, ci = x.shape
    co = dout.shape[-1]
    xp = _pad(x, kh // 2, kw // 2)
    dw = np.empty((kh, kw, ci, co), dtype=dout.dtype)
    dflat = dout.reshape(-1, co)
    for ky in range(kh):
        for kx in range(kw):
            patch = xp[:, ky:ky + h, kx:kx + wd, :].reshape(-1, ci)
            dw[ky, kx] = patch.T @ dflat
    db = dflat.sum(axis=0)
    return dw, db
