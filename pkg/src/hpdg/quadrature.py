"""Gauss-type quadrature on the reference interval [0, 1] and the reference
triangle {x, y >= 0, x + y <= 1}."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def size(self):
        return len(self.weights)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@lru_cache(maxsize=None)
def edge_rule(exactness):
    """Gauss-Legendre rule on [0, 1] exact for polynomials of degree ``exactness``.

    ``points`` has shape ``(n,)``.
    """
    if exactness < 0:
        raise ValueError("exactness must be nonnegative")
    n = exactness // 2 + 1
    x, w = leggauss(n)
    points = 0.5 * (x + 1.0)
    weights = 0.5 * w
    _freeze(points, weights)
    return QuadratureRule(points, weights, exactness)


@lru_cache(maxsize=None)
def triangle_rule(exactness):
    """Collapsed (Duffy) Gauss rule on the reference triangle.

    The collapsed direction uses Gauss-Jacobi points for the weight ``1 - x``,
    so ``n = exactness // 2 + 1`` points per direction integrate every monomial
    of total degree ``<= exactness`` exactly. ``points`` has shape ``(n*n, 2)``.
    """
    if exactness < 0:
        raise ValueError("exactness must be nonnegative")
    n = exactness // 2 + 1
    # x in [0,1] with weight (1 - x): Jacobi alpha=1 on [-1, 1] maps (1 - t) -> 2(1 - x)
    tx, wx = roots_jacobi(n, 1.0, 0.0)
    x = 0.5 * (tx + 1.0)
    wx = wx / 4.0
    ty, wy = leggauss(n)
    s = 0.5 * (ty + 1.0)
    wy = 0.5 * wy
    X = np.repeat(x, n)
    S = np.tile(s, n)
    points = np.column_stack([X, S * (1.0 - X)])
    weights = np.repeat(wx, n) * np.tile(wy, n)
    _freeze(points, weights)
    return QuadratureRule(points, weights, exactness)
