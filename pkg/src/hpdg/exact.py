"""Smooth reference solutions with derivatives of every order."""

from functools import lru_cache

import numpy as np
import sympy as sp

_X, _Y = sp.symbols("x y", real=True)


class PlaneWave:
    """``u = exp(i k d.x)`` with ``d = (cos angle, sin angle)``; solves the
    homogeneous Helmholtz equation."""

    max_order = None

    def __init__(self, k, angle=0.3):
        self.k = float(k)
        self.angle = float(angle)
        self.d = np.array([np.cos(angle), np.sin(angle)])

    def __call__(self, x, y):
        return self.derivative(0, 0, x, y)

    def derivative(self, a, b, x, y):
        ik = 1j * self.k
        phase = np.exp(ik * (self.d[0] * np.asarray(x) + self.d[1] * np.asarray(y)))
        return (ik * self.d[0]) ** a * (ik * self.d[1]) ** b * phase

    def laplacian(self, x, y):
        return -(self.k**2) * self.derivative(0, 0, x, y)

    def __repr__(self):
        return f"PlaneWave(k={self.k:g}, angle={self.angle:g})"


class SymbolicSolution:
    """A solution given as a sympy expression in ``x`` and ``y``."""

    max_order = None

    def __init__(self, expr, name=None):
        if isinstance(expr, str):
            expr = sp.sympify(expr, locals={"x": _X, "y": _Y, "I": sp.I})
        self.expr = expr
        self.name = name or str(expr)
        self._funcs = {}

    def _func(self, a, b):
        if (a, b) not in self._funcs:
            d = sp.diff(self.expr, _X, a, _Y, b) if a or b else self.expr
            self._funcs[(a, b)] = sp.lambdify((_X, _Y), d, "numpy")
        return self._funcs[(a, b)]

    def __call__(self, x, y):
        return self.derivative(0, 0, x, y)

    def derivative(self, a, b, x, y):
        x = np.asarray(x, dtype=float)
        val = self._func(a, b)(x, np.asarray(y, dtype=float))
        return np.broadcast_to(np.asarray(val, dtype=complex), x.shape).copy()

    def laplacian(self, x, y):
        return self.derivative(2, 0, x, y) + self.derivative(0, 2, x, y)

    def __repr__(self):
        return f"SymbolicSolution({self.name})"


@lru_cache(maxsize=None)
def polyquartic():
    """``(x^2 - x)(y^2 - y)``: vanishes on the unit square boundary."""
    return SymbolicSolution((_X**2 - _X) * (_Y**2 - _Y), name="polyquartic")


def box_bubble(hole_box):
    """Quartic vanishing on the four lines carrying a rectangular hole's sides."""
    x0, y0, x1, y1 = (sp.nsimplify(v) for v in hole_box)
    return SymbolicSolution((_X - x0) * (_X - x1) * (_Y - y0) * (_Y - y1), name="hole-quartic")


def source_for(u, k):
    """``f = -Laplace(u) - k^2 u``."""

    def f(x, y):
        return -u.laplacian(x, y) - k**2 * u(x, y)

    return f


def robin_datum_for(u, k):
    """``g = du/dn + i k u`` evaluated with the outward normal ``n``."""

    def g(x, y, n):
        n = np.asarray(n)
        return n[..., 0] * u.derivative(1, 0, x, y) + n[..., 1] * u.derivative(0, 1, x, y) + 1j * k * u(x, y)

    return g


def parse_exact(name, k):
    """Catalog lookup: ``planewave``, ``planewave:<angle>``, ``polyquartic``,
    ``expr:<sympy expression>`` or ``file:<path>`` (file holds an expression)."""
    if name == "planewave":
        return PlaneWave(k)
    if name.startswith("planewave:"):
        return PlaneWave(k, float(name.split(":", 1)[1]))
    if name == "polyquartic":
        return polyquartic()
    if name.startswith("expr:"):
        return SymbolicSolution(name.split(":", 1)[1])
    if name.startswith("file:"):
        with open(name.split(":", 1)[1]) as fh:
            text = "".join(line.split("#", 1)[0] for line in fh).strip()
        return SymbolicSolution(text)
    raise ValueError(f"unknown exact solution {name!r}")
