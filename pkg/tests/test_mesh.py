import numpy as np
import pytest

from hpdg.mesh import (
    AlignmentError,
    DomainSpec,
    GeometryError,
    MeshError,
    TopologyError,
    build_structured_mesh,
    classify_edges,
    make_mesh,
    mesh_quality,
    read_mesh,
    write_mesh,
)


def counts(mesh):
    return {t: int(np.sum(mesh.edge_tags == t)) for t in "IRD"}


def test_single_cell(unit):
    m = build_structured_mesh(unit, 1)
    assert (m.n_elements, m.n_edges) == (2, 5)
    assert counts(m) == {"I": 1, "R": 4, "D": 0}


def test_two_by_two(unit):
    m = build_structured_mesh(unit, 2)
    assert (m.n_elements, m.n_edges, counts(m)["I"]) == (8, 16, 8)


def test_square_annulus(holed):
    m = build_structured_mesh(holed, 4)
    assert m.n_elements == 24
    assert counts(m) == {"I": m.n_edges - 24, "R": 16, "D": 8}
    assert m.euler_characteristic() == 0
    assert len(m.interior_dirichlet) == counts(m)["I"] + 8


def test_simply_connected_euler(unit):
    assert build_structured_mesh(unit, 5, 3).euler_characteristic() == 1


def test_normals_point_out_of_larger_label(unit):
    m = build_structured_mesh(unit, 4)
    c = m.centroids()
    inter = m.interior
    plus, minus = m.edge_elements[inter].T
    assert np.all(plus > minus)
    assert np.all(np.einsum("ij,ij->i", c[minus] - c[plus], m.normals[inter]) > 0)


def test_boundary_normals_outward(holed):
    m = build_structured_mesh(holed, 8)
    c = m.centroids()
    b = m.boundary
    mid = 0.5 * (m.vertices[m.edges[b, 0]] + m.vertices[m.edges[b, 1]])
    assert np.all(np.einsum("ij,ij->i", mid - c[m.edge_elements[b, 0]], m.normals[b]) > 0)


def test_frames_orthonormal(unit):
    m = build_structured_mesh(unit, 3)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1)
    assert np.allclose(m.tangents, np.column_stack([-m.normals[:, 1], m.normals[:, 0]]))


def test_closed_polygons(holed):
    m = build_structured_mesh(holed, 8)
    c = m.centroids()
    total = np.zeros((m.n_elements, 2))
    for e in range(m.n_edges):
        for side, sign in ((0, 1.0), (1, -1.0)):
            k = m.edge_elements[e, side]
            if k >= 0:
                total[k] += sign * m.lengths[e] * m.normals[e]
    assert np.abs(total).max() < 1e-14
    assert c.shape == (m.n_elements, 2)


def test_area(holed):
    m = build_structured_mesh(holed, 8)
    assert m.areas().sum() == pytest.approx(holed.area, abs=1e-14)


def test_star_shape_signs(holed):
    m = build_structured_mesh(holed, 8)
    for edges, sign in ((m.robin, 1), (m.dirichlet, -1)):
        mid = 0.5 * (m.vertices[m.edges[edges, 0]] + m.vertices[m.edges[edges, 1]])
        an = np.einsum("ij,ij->i", holed.alpha(mid), m.normals[edges])
        assert np.all(sign * an >= 0)
    r = m.robin
    mid = 0.5 * (m.vertices[m.edges[r, 0]] + m.vertices[m.edges[r, 1]])
    assert np.all(np.einsum("ij,ij->i", holed.alpha(mid), m.normals[r]) >= holed.c_outer - 1e-14)


def test_domain_defaults(holed):
    assert holed.center == (0.5, 0.5)
    assert holed.c_outer == 0.5 and holed.c_hole == 0.25


@pytest.mark.parametrize(
    "kwargs",
    [
        {"outer": ((0, 0), (0, 1))},
        {"hole": ((0.5, 0.5), (1.5, 0.7))},
        {"hole": ((0.1, 0.1), (0.3, 0.3)), "center": (0.5, 0.5)},
        {"center": (2.0, 0.5)},
    ],
)
def test_domain_validation(kwargs):
    with pytest.raises(GeometryError):
        DomainSpec(**kwargs)


def test_alignment_error():
    d = DomainSpec(hole=((0.3, 0.3), (0.7, 0.7)))
    with pytest.raises(AlignmentError):
        build_structured_mesh(d, 4)


def test_bad_counts(unit):
    with pytest.raises(ValueError):
        build_structured_mesh(unit, 0)


def test_quality(unit):
    q = mesh_quality(build_structured_mesh(unit, 4))
    assert q.min_angle == pytest.approx(45.0)
    assert q.adjacency_ratio == pytest.approx(1.0)
    assert not q.below_threshold
    assert q.h == pytest.approx(np.sqrt(2) / 4)


def test_sliver_flagged():
    m = make_mesh([(0, 0), (1, 0), (0.5, 0.04)], [(0, 1, 2)], edge_tags={(0, 1): "R", (1, 2): "R", (0, 2): "R"})
    q = mesh_quality(m)
    assert q.min_angle < 5.0 and q.below_threshold


def test_clockwise_input_reoriented():
    m = make_mesh([(0, 0), (1, 0), (0, 1)], [(0, 2, 1)], edge_tags={(0, 1): "R", (1, 2): "R", (0, 2): "R"})
    assert np.linalg.det(m.jacobians()[0]) > 0


def test_unclassifiable_edge():
    # a triangle whose hypotenuse is not on the outer rectangle
    with pytest.raises(TopologyError):
        make_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], domain=DomainSpec())


def test_degenerate_triangle():
    with pytest.raises(GeometryError):
        make_mesh([(0, 0), (1, 0), (2, 0)], [(0, 1, 2)], domain=DomainSpec())


def test_classify_matches_builder(holed):
    m = build_structured_mesh(holed, 4)
    assert np.array_equal(classify_edges(m, holed).edge_tags, m.edge_tags)


def test_file_roundtrip(tmp_path, holed):
    m = build_structured_mesh(holed, 4)
    path = tmp_path / "annulus.mesh"
    write_mesh(m, path)
    back = read_mesh(path)
    assert np.array_equal(back.edge_tags, m.edge_tags)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.normals, m.normals)


def test_file_without_edges_uses_domain(tmp_path, unit):
    path = tmp_path / "sq.mesh"
    path.write_text("# unit square\n4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3  # second\n")
    m = read_mesh(path, domain=unit)
    assert counts(m) == {"I": 1, "R": 4, "D": 0}


def test_file_errors(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("4 2 5\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 R\n1 2 R\n2 3 R\n0 3 X\n0 2 I\n")
    with pytest.raises(MeshError):
        read_mesh(path)
    path.write_text("4 2 5\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 R\n1 2 R\n2 3 R\n0 3 I\n0 2 I\n")
    with pytest.raises(TopologyError):
        read_mesh(path)
    path.write_text("4 2\n0 0\n1 0\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_mesh_is_immutable(unit):
    m = build_structured_mesh(unit, 2)
    with pytest.raises(ValueError):
        m.normals[0, 0] = 3.0
