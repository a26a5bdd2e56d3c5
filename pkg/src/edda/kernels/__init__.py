"""Backend dispatch for the hot convolution kernels.

The default backend is numba (JIT-compiled, cached on disk). Set the
environment variable ``EDDA_BACKEND=numpy`` to force the pure-numpy fallback,
or ``EDDA_BACKEND=numba`` to fail loudly if numba is unavailable. Both
backends implement the same functions with identical semantics; only
floating-point summation order differs.
"""

from __future__ import annotations

import os
import warnings

from . import numpy_impl

BACKEND_ENV = "EDDA_BACKEND"
BACKENDS = ("numba", "numpy")

_active = numpy_impl
_active_name = "numpy"


def set_backend(name: str) -> None:
    """Switch the kernel backend at runtime ("numba" or "numpy")."""
    global _active, _active_name
    if name == "numpy":
        _active = numpy_impl
    elif name == "numba":
        from . import numba_impl

        _active = numba_impl
    else:
        raise ValueError(f"unknown kernel backend {name!r}; choose from {BACKENDS}")
    _active_name = name


def backend_name() -> str:
    return _active_name


def _init_from_env() -> None:
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            set_backend("numba")
        except ImportError:
            warnings.warn("numba unavailable; falling back to numpy kernels")
            set_backend("numpy")
    else:
        set_backend(choice)


def conv2d_forward(x, w, b):
    return _active.conv2d_forward(x, w, b)


def conv2d_input_grad(dout, w):
    return _active.conv2d_input_grad(dout, w)


def conv2d_param_grads(x, dout, kh=3, kw=3):
    return _active.conv2d_param_grads(x, dout, kh, kw)


_init_from_env()
