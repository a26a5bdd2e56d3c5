"""Numba-jitted convolution kernels (default backend).

Loop nests keep the output-channel axis innermost so reads and writes stay
contiguous. All kernels are serial and summation order is fixed, so results
are bit-reproducible run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _conv2d_forward(xp, w, b, out):
    n, h, wd, co = out.shape
    kh, kw, ci, _ = w.shape
    for i in range(n):
        for y in range(h):
            for x in range(wd):
                for c in range(co):
                    out[i, y, x, c] = b[c]
                for ky in range(kh):
                    for kx in range(kw):
                        for ic in range(ci):
                            xv = xp[i, y + ky, x + kx, ic]
                            if xv != 0.0:
                                for c in range(co):
                                    out[i, y, x, c] += xv * w[ky, kx, ic, c]


@njit(cache=True)
def _conv2d_input_grad(dout, w, dx):
    n, h, wd, ci = dx.shape
    kh, kw, _, co = w.shape
    ph = kh // 2
    pw = kw // 2
    for i in range(n):
        for y in range(h):
            for x in range(wd):
                for ky in range(kh):
                    oy = y - ky + ph
                    if oy < 0 or oy >= h:
                        continue
                    for kx in range(kw):
                        ox = x - kx + pw
                        if ox < 0 or ox >= wd:
                            continue
                        for ic in range(ci):
                            acc = 0.0
                            for c in range(co):
                                acc += dout[i, oy, ox, c] * w[ky, kx, ic, c]
                            dx[i, y, x, ic] += acc


@njit(cache=True)
def _conv2d_param_grads(xp, dout, dw, db):
    n, h, wd, co = dout.shape
    kh, kw, ci, _ = dw.shape
    for i in range(n):
        for y in range(h):
            for x in range(wd):
                for c in range(co):
                    db[c] += dout[i, y, x, c]
                for ky in range(kh):
                    for kx in range(kw):
                        for ic in range(ci):
                            xv = xp[i, y + ky, x + kx, ic]
                            if xv != 0.0:
                                for c in range(co):
                                    dw[ky, kx, ic, c] += xv * dout[i, y, x, c]


def _pad(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, h, wd, _ = x.shape
    kh, kw, _, co = w.shape
    xp = _pad(x, kh // 2, kw // 2)
    out = np.empty((n, h, wd, co), dtype=np.float64)
    _conv2d_forward(xp, w, b, out)
    return out


def conv2d_input_grad(dout: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, h, wd, _ = dout.shape
    ci = w.shape[2]
    dx = np.zeros((n, h, wd, ci), dtype=np.float64)
    _conv2d_input_grad(np.ascontiguousarray(dout), w, dx)
    return dx


def conv2d_param_grads(x: np.ndarray, dout: np.ndarray, kh: int = 3, kw: int = 3):
    ci = x.shape[-1]
    co = dout.shape[-1]
    xp = _pad(x, kh // 2, kw // 2)
    dw = np.zeros((kh, kw, ci, co), dtype=np.float64)
    db = np.zeros(co, dtype=np.float64)
    _conv2d_param_grads(xp, np.ascontiguousarray(dout), dw, db)
    return dw, db
