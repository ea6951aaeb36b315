"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def weighted_products(w, a, b):
    """out[e, i, j] = sum_q w[e, q] * a[e, q, i] * b[e, q, j]"""
    w, a, b = np.asarray(w, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape[:2] != w.shape or b.shape[:2] != w.shape:
        raise ValueError("shape mismatch")
    return np.matmul((a * w[:, :, None]).transpose(0, 2, 1), b)


def weighted_gram(w, a):
    return weighted_products(w, a, a)
