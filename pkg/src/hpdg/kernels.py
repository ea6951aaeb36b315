"""Kernel backend selection.

The compiled extension is used when importable; set ``HPDG_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("HPDG_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _c(x):
    return np.ascontiguousarray(x, dtype=float)


def weighted_products(w, a, b):
    """Batched ``sum_q w[e,q] a[e,q,:]^T b[e,q,:]``, shape ``(ne, m, n)``."""
    if a is b:
        return _impl.weighted_gram(_c(w), _c(a))
    return _impl.weighted_products(_c(w), _c(a), _c(b))


def use_backend(name):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the previous one."""
    global _impl, BACKEND
    prev = BACKEND
    if name == "cython":
        from . import _kernels as _compiled

        _impl = _compiled
    elif name == "python":
        _impl = _kernels_py
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return prev
