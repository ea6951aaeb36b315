"""The broken polynomial space V_h^p on a mesh, and fields that can be
evaluated on it (basis tables, discrete functions, exact functions).

Every field answers two questions: the value of ``d^a/dx^a d^b/dy^b`` at the
volume quadrature points of every element, and at the edge quadrature points
of a batch of edges seen from one side. Basis tables carry a trailing axis of
length ``dim``; scalar fields do not.

Sides: ``0`` is the plus element (larger label, or the only element on a
boundary edge), ``1`` the minus element. Side 1 only exists on interior edges.
"""

from functools import cached_property
from math import comb

import numpy as np

from .basis import ReferenceBasis
from .quadrature import edge_rule, triangle_rule


def _chain_coefficients(jinv, a, b):
    """Coefficients of ``d_x^a d_y^b`` in terms of reference derivatives.

    Returns ``{(alpha, beta): coef}`` with ``coef`` shaped like ``jinv[..., 0, 0]``.
    """
    # d/dx = J^{-1}[0,0] d/dxi + J^{-1}[1,0] d/deta ; d/dy = J^{-1}[0,1] d/dxi + J^{-1}[1,1] d/deta
    ops = [(jinv[..., 0, 0], jinv[..., 1, 0])] * a + [(jinv[..., 0, 1], jinv[..., 1, 1])] * b
    poly = {(0, 0): np.ones_like(jinv[..., 0, 0])}
    for cx, cy in ops:
        nxt = {}
        for (al, be), c in poly.items():
            nxt[(al + 1, be)] = nxt.get((al + 1, be), 0.0) + c * cx
            nxt[(al, be + 1)] = nxt.get((al, be + 1), 0.0) + c * cy
        poly = nxt
    return poly


class Space:
    """V_h^p with cached quadrature geometry and basis tables.

    ``exactness`` is the polynomial degree integrated exactly by the volume
    and edge rules (default ``2p + 2``).
    """

    def __init__(self, mesh, p, exactness=None):
        self.mesh = mesh
        self.p = p
        self.basis = ReferenceBasis(p)
        self.exactness = 2 * p + 2 if exactness is None else exactness
        self.vrule = triangle_rule(self.exactness)
        self.erule = edge_rule(self.exactness)
        self._vol_cache = {}
        self._edge_cache = {}

    def with_exactness(self, exactness):
        if exactness == self.exactness:
            return self
        return Space(self.mesh, self.p, exactness)

    @property
    def dim(self):
        return self.basis.dim

    @property
    def n_dofs(self):
        return self.mesh.n_elements * self.dim

    def dofs(self, elements):
        elements = np.asarray(elements)
        return elements[..., None] * self.dim + np.arange(self.dim)

    # geometry

    @cached_property
    def jacobian(self):
        return self.mesh.jacobians()

    @cached_property
    def jacobian_inverse(self):
        return np.linalg.inv(self.jacobian)

    @cached_property
    def det(self):
        return np.abs(np.linalg.det(self.jacobian))

    @cached_property
    def volume_points(self):
        """Physical volume quadrature points, shape ``(n_elements, nq, 2)``."""
        v0 = self.mesh.vertices[self.mesh.triangles[:, 0]]
        return v0[:, None, :] + np.einsum("kij,qj->kqi", self.jacobian, self.vrule.points)

    @cached_property
    def volume_weights(self):
        return self.det[:, None] * self.vrule.weights[None, :]

    def batch(self, name):
        """Edge indices of a batch: ``I``, ``R``, ``D``, ``ID`` or ``all``."""
        m = self.mesh
        return {
            "I": m.interior,
            "R": m.robin,
            "D": m.dirichlet,
            "ID": m.interior_dirichlet,
            "all": np.arange(m.n_edges),
        }[name]

    def edge_points(self, edges):
        m = self.mesh
        a = m.vertices[m.edges[edges, 0]]
        b = m.vertices[m.edges[edges, 1]]
        return a[:, None, :] + self.erule.points[None, :, None] * (b - a)[:, None, :]

    def edge_weights(self, edges):
        return self.mesh.lengths[edges, None] * self.erule.weights[None, :]

    def side_elements(self, edges, side):
        el = self.mesh.edge_elements[edges, side]
        if np.any(el < 0):
            raise ValueError("side 1 requested on a boundary edge")
        return el

    # basis tables

    def _reference_volume(self, al, be):
        key = ("ref", al, be)
        if key not in self._vol_cache:
            self._vol_cache[key] = self.basis.eval(self.vrule.points, (al, be))
        return self._vol_cache[key]

    def volume_table(self, a, b):
        """Physical derivative ``(a, b)`` of all basis functions at volume points,
        shape ``(n_elements, nq, dim)``."""
        key = (a, b)
        if key not in self._vol_cache:
            out = 0.0
            for (al, be), c in _chain_coefficients(self.jacobian_inverse, a, b).items():
                out = out + c[:, None, None] * self._reference_volume(al, be)[None]
            self._vol_cache[key] = out
        return self._vol_cache[key]

    def _reference_coords(self, batch, side):
        key = ("refpts", batch, side)
        if key not in self._edge_cache:
            edges = self.batch(batch)
            el = self.side_elements(edges, side)
            v0 = self.mesh.vertices[self.mesh.triangles[el, 0]]
            x = self.edge_points(edges)
            self._edge_cache[key] = np.einsum("eij,eqj->eqi", self.jacobian_inverse[el], x - v0[:, None, :])
        return self._edge_cache[key]

    def edge_table(self, batch, side, a, b):
        """Physical derivative ``(a, b)`` of the basis of the ``side`` element at
        the quadrature points of a batch of edges, shape ``(n_batch, nq, dim)``."""
        key = (batch, side, a, b)
        if key not in self._edge_cache:
            edges = self.batch(batch)
            el = self.side_elements(edges, side) if len(edges) else np.zeros(0, dtype=int)
            ref = self._reference_coords(batch, side)
            out = np.zeros(ref.shape[:2] + (self.dim,))
            for (al, be), c in _chain_coefficients(self.jacobian_inverse[el], a, b).items():
                out += c[:, None, None] * self.basis.eval(ref, (al, be))
            self._edge_cache[key] = out
        return self._edge_cache[key]


class BasisField:
    """All basis functions of ``V_h^p`` at once (trailing axis = local dof)."""

    is_basis = True

    def volume(self, space, a, b):
        return space.volume_table(a, b)

    def trace(self, space, batch, side, a, b):
        return space.edge_table(batch, side, a, b)


class DGFunction:
    """A discrete function ``sum_i c_i phi_i``; ``coefficients`` is element-major."""

    is_basis = False

    def __init__(self, space, coefficients):
        coefficients = np.asarray(coefficients)
        if coefficients.size != space.n_dofs:
            raise ValueError(f"expected {space.n_dofs} coefficients, got {coefficients.size}")
        self.space = space
        self.coefficients = coefficients.reshape(-1)

    @property
    def local(self):
        return self.coefficients.reshape(self.space.mesh.n_elements, self.space.dim)

    def volume(self, space, a, b):
        return np.einsum("kqi,ki->kq", space.volume_table(a, b), self.local)

    def trace(self, space, batch, side, a, b):
        el = space.side_elements(space.batch(batch), side)
        return np.einsum("eqi,ei->eq", space.edge_table(batch, side, a, b), self.local[el])

    def __add__(self, other):
        return DGFunction(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return DGFunction(self.space, self.coefficients - other.coefficients)

    def __mul__(self, s):
        return DGFunction(self.space, s * self.coefficients)

    __rmul__ = __mul__


class ExactField:
    """Wraps a smooth function given through ``derivative(a, b, x, y)``.

    Traces are single-valued, so both sides agree.
    """

    is_basis = False

    def __init__(self, func):
        self.func = func

    def volume(self, space, a, b):
        x = space.volume_points
        return np.asarray(self.func.derivative(a, b, x[..., 0], x[..., 1]), dtype=complex)

    def trace(self, space, batch, side, a, b):
        x = space.edge_points(space.batch(batch))
        return np.asarray(self.func.derivative(a, b, x[..., 0], x[..., 1]), dtype=complex)


class Difference:
    """``left - right`` for two scalar fields."""

    is_basis = False

    def __init__(self, left, right):
        self.left, self.right = left, right

    def volume(self, space, a, b):
        return self.left.volume(space, a, b) - self.right.volume(space, a, b)

    def trace(self, space, batch, side, a, b):
        return self.left.trace(space, batch, side, a, b) - self.right.trace(space, batch, side, a, b)


def as_field(obj):
    if hasattr(obj, "volume") and hasattr(obj, "trace"):
        return obj
    if hasattr(obj, "derivative"):
        return ExactField(obj)
    raise TypeError(f"cannot evaluate {type(obj).__name__} on a DG space")


def _expand(coef, like):
    return coef.reshape(coef.shape + (1,) * (like.ndim - coef.ndim))


def directional(field, space, batch, side, direction, order):
    """``(direction . grad)^order`` of a field on a batch of edges.

    ``direction`` has shape ``(n_batch, 2)`` (constant along each edge).
    """
    if order == 0:
        return field.trace(space, batch, side, 0, 0)
    out = 0.0
    for a in range(order + 1):
        t = field.trace(space, batch, side, a, order - a)
        c = comb(order, a) * direction[:, 0] ** a * direction[:, 1] ** (order - a)
        out = out + _expand(c[:, None], t) * t
    return out


def gradient(field, space, batch, side):
    """Gradient traces, trailing axis of length 2 appended last."""
    return np.stack([field.trace(space, batch, side, 1, 0), field.trace(space, batch, side, 0, 1)], axis=-1)


def l2_project(space, func):
    """Elementwise L2 projection of a smooth function onto V_h^p."""
    f = as_field(func).volume(space, 0, 0)
    phi = space.volume_table(0, 0)
    rhs = np.einsum("kq,kq,kqi->ki", space.volume_weights, f, phi)
    # orthonormal reference basis: the physical mass block is |det J| * I
    return DGFunction(space, rhs / space.det[:, None])
