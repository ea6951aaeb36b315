"""Orthonormal modal basis of P_p on the reference triangle, plus numerical
estimates of the polynomial trace and inverse inequality constants."""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np
import scipy.linalg

from .mesh import GeometryError
from .quadrature import edge_rule, triangle_rule

MAX_DEGREE = 8


class UnsupportedOrderError(ValueError):
    pass


def monomial_exponents(p):
    """Graded-lex exponents ``(a, b)`` of ``x**a * y**b`` with ``a + b <= p``."""
    return [(n - b, b) for n in range(p + 1) for b in range(n + 1)]


_CENTER = Fraction(1, 3)


def _monomial_integral(a, b):
    # int_T x^a y^b = a! b! / (a + b + 2)!
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def _centered_integral(a, b):
    # int_T (x - 1/3)^a (y - 1/3)^b, expanded binomially
    total = Fraction(0)
    for i in range(a + 1):
        for j in range(b + 1):
            c = comb(a, i) * comb(b, j) * (-_CENTER) ** (a - i + b - j)
            total += c * _monomial_integral(i, j)
    return total


@lru_cache(maxsize=None)
def _orthonormal_coefficients(p):
    """Gram-Schmidt of graded-lex monomials in exact rational arithmetic.

    Monomials are centered at the reference centroid; because the ordering is
    graded, each partial span (and hence the resulting basis) is unchanged.
    Returns a float array ``C`` with ``phi_i = sum_j C[i, j] m_j(x - 1/3, y - 1/3)``.
    """
    exps = monomial_exponents(p)
    n = len(exps)
    gram = [[_centered_integral(a1 + a2, b1 + b2) for (a2, b2) in exps] for (a1, b1) in exps]

    def inner(u, v):
        return sum(u[i] * v[j] * gram[i][j] for i in range(n) if u[i] for j in range(n) if v[j])

    ortho = []
    norms = []
    for i in range(n):
        u = [Fraction(int(i == j)) for j in range(n)]
        for q, nq in zip(ortho, norms):
            c = inner(u, q) / nq
            u = [ui - c * qi for ui, qi in zip(u, q)]
        ortho.append(u)
        norms.append(inner(u, u))
    C = np.array([[float(c) for c in u] for u in ortho])
    scale = np.array([1.0 / np.sqrt(float(nq)) for nq in norms])
    return C * scale[:, None]


@dataclass(frozen=True)
class ReferenceBasis:
    """Orthonormal basis of P_p on the reference triangle.

    Basis function ``i`` lies in the span of the first ``i + 1`` graded-lex
    monomials; the reference mass matrix is the identity.
    """

    p: int
    coefficients: np.ndarray = field(init=False, repr=False)
    exponents: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.p <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {self.p}")
        object.__setattr__(self, "coefficients", _orthonormal_coefficients(self.p))
        object.__setattr__(self, "exponents", tuple(monomial_exponents(self.p)))

    @property
    def dim(self):
        return (self.p + 1) * (self.p + 2) // 2

    def eval(self, points, derivative=(0, 0)):
        return eval_basis(self, points, derivative)


def eval_basis(basis, points, derivative=(0, 0)):
    """Values of ``d^a/dx^a d^b/dy^b phi_i`` at reference points.

    ``points`` has shape ``(..., 2)``; the result has shape ``(..., dim)``.
    Derivatives of total order ``p + 1`` are identically zero.
    """
    a, b = derivative
    if a < 0 or b < 0 or a + b > basis.p + 1:
        raise UnsupportedOrderError(f"derivative order {a + b} exceeds p + 1 = {basis.p + 1}")
    points = np.asarray(points, dtype=float)
    x = points[..., 0] - 1.0 / 3.0
    y = points[..., 1] - 1.0 / 3.0
    cols = []
    for ex, ey in basis.exponents:
        if ex < a or ey < b:
            cols.append(np.zeros_like(x))
            continue
        c = factorial(ex) // factorial(ex - a) * factorial(ey) // factorial(ey - b)
        cols.append(c * x ** (ex - a) * y ** (ey - b))
    M = np.stack(cols, axis=-1)
    return M @ basis.coefficients.T


def _element_matrices(basis, vertices):
    """Physical mass, boundary-trace mass and stiffness matrices on one triangle."""
    v = np.asarray(vertices, dtype=float)
    J = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = np.linalg.det(J)
    if abs(det) < 1e-14 * max(1.0, np.abs(J).max() ** 2):
        raise GeometryError("degenerate triangle")
    Jinv = np.linalg.inv(J)
    p = basis.p
    vol = triangle_rule(2 * p + 2)
    phi = basis.eval(vol.points)
    w = vol.weights * abs(det)
    mass = phi.T @ (w[:, None] * phi)
    gref = np.stack([basis.eval(vol.points, (1, 0)), basis.eval(vol.points, (0, 1))], axis=-1)
    grad = gref @ Jinv  # (nq, n, 2)
    stiff = np.einsum("q,qid,qjd->ij", w, grad, grad)
    er = edge_rule(2 * p + 2)
    ref_v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    trace = np.zeros_like(mass)
    for i in range(3):
        A, B = ref_v[i], ref_v[(i + 1) % 3]
        pts = A + er.points[:, None] * (B - A)
        length = np.linalg.norm(v[(i + 1) % 3] - v[i])
        t = basis.eval(pts)
        trace += t.T @ ((er.weights * length)[:, None] * t)
    return mass, trace, stiff


def estimate_inequality_constants(p, vertices, samples=200, seed=0):
    """Estimate ``(C_trace, C_inverse)`` for P_p on a physical triangle.

    ``C_trace = max ||z||_{dK} h^{1/2} / (p ||z||_K)`` and
    ``C_inverse = max ||grad z||_K h / (p^2 ||z||_K)`` with ``h = diam(K)``.
    The maxima come from generalized eigenproblems; random coefficient vectors
    only serve as a lower bound sanity check (returned in the third slot).
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    basis = ReferenceBasis(p)
    v = np.asarray(vertices, dtype=float)
    mass, trace, stiff = _element_matrices(basis, v)
    h = max(np.linalg.norm(v[i] - v[j]) for i in range(3) for j in range(i))
    lam_t = scipy.linalg.eigh(trace, mass, eigvals_only=True)[-1]
    lam_s = scipy.linalg.eigh(stiff, mass, eigvals_only=True)[-1]
    c_trace = np.sqrt(lam_t * h) / p
    c_inv = np.sqrt(lam_s) * h / p**2

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, basis.dim))
    zm = np.einsum("si,ij,sj->s", z, mass, z)
    sampled_trace = np.sqrt(np.einsum("si,ij,sj->s", z, trace, z) / zm * h).max() / p
    sampled_inv = np.sqrt(np.einsum("si,ij,sj->s", z, stiff, z) / zm).max() * h / p**2
    return c_trace, c_inv, (sampled_trace, sampled_inv)
