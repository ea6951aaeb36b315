import numpy as np
import pytest

from hpdg.exact import SymbolicSolution
from hpdg.mesh import DomainSpec, build_structured_mesh, make_mesh
from hpdg.space import DGFunction, ExactField, Space, directional, l2_project


@pytest.fixture
def skewed():
    verts = [(0.0, 0.0), (1.3, 0.2), (0.4, 1.1), (1.5, 1.4)]
    return make_mesh(verts, [(0, 1, 2), (1, 3, 2)], domain=None,
                     edge_tags={(0, 1): "R", (1, 3): "R", (2, 3): "R", (0, 2): "R"})


def test_chain_rule_quadratic(skewed):
    u = SymbolicSolution("3*x**2 - 2*x*y + y**2/2 + x - 4")
    s = Space(skewed, 2)
    uh = l2_project(s, u)
    x = s.volume_points
    for a, b in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
        assert np.allclose(uh.volume(s, a, b), u.derivative(a, b, x[..., 0], x[..., 1]), atol=1e-12)


def test_projection_reproduces_polynomials(skewed):
    u = SymbolicSolution("x**3 - x*y**2 + 2*y")
    s = Space(skewed, 3)
    uh = l2_project(s, u)
    for batch in ("R",):
        xe = s.edge_points(s.batch(batch))
        assert np.allclose(uh.trace(s, batch, 0, 0, 0), u(xe[..., 0], xe[..., 1]), atol=1e-12)


def test_traces_agree_for_continuous_function():
    s = Space(build_structured_mesh(DomainSpec(), 3), 2)
    uh = l2_project(s, SymbolicSolution("x*y + y**2"))
    for a, b in [(0, 0), (1, 0), (0, 1), (2, 0)]:
        assert np.allclose(uh.trace(s, "I", 0, a, b), uh.trace(s, "I", 1, a, b), atol=1e-12)


def test_directional_matches_exact():
    s = Space(build_structured_mesh(DomainSpec(), 2), 3)
    u = SymbolicSolution("x**3 + 2*x*y**2")
    n = s.mesh.normals[s.batch("I")]
    got = directional(ExactField(u), s, "I", 0, n, 2)
    x = s.edge_points(s.batch("I"))
    X, Y = x[..., 0], x[..., 1]
    nx, ny = n[:, 0:1], n[:, 1:2]
    want = nx**2 * u.derivative(2, 0, X, Y) + 2 * nx * ny * u.derivative(1, 1, X, Y) + ny**2 * u.derivative(0, 2, X, Y)
    assert np.allclose(got, want)


def test_boundary_has_no_minus_side():
    s = Space(build_structured_mesh(DomainSpec(), 2), 1)
    with pytest.raises(ValueError):
        s.edge_table("R", 1, 0, 0)


def test_dg_function_arithmetic():
    s = Space(build_structured_mesh(DomainSpec(), 2), 1)
    a = DGFunction(s, np.arange(s.n_dofs, dtype=complex))
    b = 2 * a - a
    assert np.array_equal(b.coefficients, a.coefficients)
    with pytest.raises(ValueError):
        DGFunction(s, np.zeros(3))


def test_weights_sum_to_area():
    d = DomainSpec(hole=((0.25, 0.25), (0.75, 0.75)))
    s = Space(build_structured_mesh(d, 4), 2)
    assert s.volume_weights.sum() == pytest.approx(0.75)
    assert s.edge_weights(s.batch("R")).sum() == pytest.approx(4.0)
