"""Conforming triangular meshes of a rectangle minus an optional rectangular
scatterer, with the edge orientation conventions used by the DG forms.

Element labels are storage indices. On an interior edge the "plus" element is
the one with the larger label; the edge normal points out of it and jumps are
``plus - minus``.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INTERIOR, ROBIN, DIRICHLET = "I", "R", "D"


class MeshError(ValueError):
    pass


class GeometryError(MeshError):
    pass


class AlignmentError(MeshError):
    pass


class TopologyError(MeshError):
    pass


def _box(corners):
    (x0, y0), (x1, y1) = corners
    return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))


@dataclass(frozen=True)
class DomainSpec:
    """Outer rectangle, optional rectangular hole and star-shape data.

    ``center`` defaults to the hole center (or the outer center without a
    hole). ``c_outer``/``c_hole`` default to the exact star constants of the
    rectangles with respect to ``center``.
    """

    outer: tuple = ((0.0, 0.0), (1.0, 1.0))
    hole: tuple | None = None
    center: tuple | None = None
    c_outer: float | None = None
    c_hole: float | None = None

    def __post_init__(self):
        ox0, oy0, ox1, oy1 = self.outer_box
        if ox1 - ox0 <= 0 or oy1 - oy0 <= 0:
            raise GeometryError("degenerate outer rectangle")
        if self.hole is not None:
            hx0, hy0, hx1, hy1 = self.hole_box
            if hx1 - hx0 <= 0 or hy1 - hy0 <= 0:
                raise GeometryError("degenerate hole rectangle")
            if not (ox0 < hx0 and hx1 < ox1 and oy0 < hy0 and hy1 < oy1):
                raise GeometryError("hole must lie strictly inside the outer rectangle")
        if self.center is None:
            box = self.hole_box if self.hole is not None else self.outer_box
            object.__setattr__(self, "center", (0.5 * (box[0] + box[2]), 0.5 * (box[1] + box[3])))
        cx, cy = self.center
        if not (ox0 < cx < ox1 and oy0 < cy < oy1):
            raise GeometryError("star center must lie inside the outer rectangle")
        if self.c_outer is None:
            object.__setattr__(self, "c_outer", min(cx - ox0, ox1 - cx, cy - oy0, oy1 - cy))
        if self.c_outer <= 0:
            raise GeometryError("outer rectangle must be strictly star-shaped (c_outer > 0)")
        if self.hole is not None:
            hx0, hy0, hx1, hy1 = self.hole_box
            if not (hx0 < cx < hx1 and hy0 < cy < hy1):
                raise GeometryError("hole must contain the star center")
            if self.c_hole is None:
                object.__setattr__(self, "c_hole", min(cx - hx0, hx1 - cx, cy - hy0, hy1 - cy))
        elif self.c_hole is None:
            object.__setattr__(self, "c_hole", 0.0)
        if self.c_hole < 0:
            raise GeometryError("c_hole must be nonnegative")

    @property
    def outer_box(self):
        return _box(self.outer)

    @property
    def hole_box(self):
        return None if self.hole is None else _box(self.hole)

    @property
    def area(self):
        ox0, oy0, ox1, oy1 = self.outer_box
        a = (ox1 - ox0) * (oy1 - oy0)
        if self.hole is not None:
            hx0, hy0, hx1, hy1 = self.hole_box
            a -= (hx1 - hx0) * (hy1 - hy0)
        return a

    def alpha(self, x):
        """``x - x_center`` for points of shape ``(..., 2)``."""
        return np.asarray(x) - np.asarray(self.center)

    def on_outer_boundary(self, x, tol=1e-12):
        x0, y0, x1, y1 = self.outer_box
        s = tol * max(x1 - x0, y1 - y0)
        return _on_box(x, (x0, y0, x1, y1), s)

    def on_hole_boundary(self, x, tol=1e-12):
        if self.hole is None:
            return np.zeros(np.shape(x)[:-1], dtype=bool)
        x0, y0, x1, y1 = self.hole_box
        s = tol * max(x1 - x0, y1 - y0)
        return _on_box(x, (x0, y0, x1, y1), s)


def _on_box(x, box, tol):
    x = np.asarray(x)
    x0, y0, x1, y1 = box
    px, py = x[..., 0], x[..., 1]
    inside = (px > x0 - tol) & (px < x1 + tol) & (py > y0 - tol) & (py < y1 + tol)
    side = (
        (np.abs(px - x0) < tol) | (np.abs(px - x1) < tol) | (np.abs(py - y0) < tol) | (np.abs(py - y1) < tol)
    )
    return inside & side


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation with classified, oriented edges.

    ``edge_elements[e] = (plus, minus)``; ``minus == -1`` on boundary edges.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_elements: np.ndarray
    edge_tags: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    element_edges: np.ndarray = field(repr=False)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior(self):
        return np.flatnonzero(self.edge_tags == INTERIOR)

    @property
    def robin(self):
        return np.flatnonzero(self.edge_tags == ROBIN)

    @property
    def dirichlet(self):
        return np.flatnonzero(self.edge_tags == DIRICHLET)

    @property
    def interior_dirichlet(self):
        return np.flatnonzero(self.edge_tags != ROBIN)

    @property
    def boundary(self):
        return np.flatnonzero(self.edge_tags != INTERIOR)

    @property
    def h(self):
        """Global mesh size ``max h_e``."""
        return float(self.lengths.max())

    def jacobians(self):
        v = self.vertices[self.triangles]
        return np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)

    def areas(self):
        return 0.5 * np.abs(np.linalg.det(self.jacobians()))

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def diameters(self):
        v = self.vertices[self.triangles]
        d = np.linalg.norm(v - np.roll(v, -1, axis=1), axis=-1)
        return d.max(axis=1)

    def euler_characteristic(self):
        return len(self.vertices) - self.n_edges + self.n_elements


def _derive_edges(triangles):
    local = np.array([[0, 1], [1, 2], [2, 0]])
    pairs = triangles[:, local].reshape(-1, 2)
    key = np.sort(pairs, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if counts.max() > 2:
        raise TopologyError("edge shared by more than two triangles")
    owners = np.repeat(np.arange(len(triangles)), 3)
    elems = np.full((len(uniq), 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    first = np.ones(len(order), dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    elems[inverse[order][first], 0] = owners[order][first]
    elems[inverse[order][~first], 1] = owners[order][~first]
    # plus = larger label
    swap = elems[:, 1] > elems[:, 0]
    elems[swap] = elems[swap][:, ::-1]
    element_edges = inverse.reshape(-1, 3)
    return uniq, elems, element_edges


def _orient(vertices, triangles, edges, edge_elements):
    a = vertices[edges[:, 0]]
    b = vertices[edges[:, 1]]
    d = b - a
    lengths = np.linalg.norm(d, axis=1)
    if np.any(lengths <= 0):
        raise GeometryError("zero-length edge")
    t = d / lengths[:, None]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    # flip so n points out of the plus element
    c = vertices[triangles[edge_elements[:, 0]]].mean(axis=1)
    flip = np.einsum("ij,ij->i", 0.5 * (a + b) - c, n) < 0
    n[flip] *= -1.0
    tau = np.column_stack([-n[:, 1], n[:, 0]])
    return n, tau, lengths


def _ccw(vertices, triangles):
    v = vertices[triangles]
    det = np.linalg.det(np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1))
    if np.any(np.abs(det) < 1e-14 * max(1.0, np.abs(vertices).max()) ** 2):
        raise GeometryError("degenerate triangle")
    tri = triangles.copy()
    neg = det < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    return tri


def make_mesh(vertices, triangles, domain=None, edge_tags=None):
    """Build a :class:`Mesh` from vertices and triangles.

    Boundary tags come from ``edge_tags`` (mapping of sorted vertex pairs to
    ``"I"``/``"R"``/``"D"``) when given, otherwise from ``domain``.
    """
    vertices = np.array(vertices, dtype=float)
    triangles = _ccw(vertices, np.array(triangles, dtype=np.int64))
    edges, edge_elements, element_edges = _derive_edges(triangles)
    tags = _classify(vertices, edges, edge_elements, domain, edge_tags)
    n, tau, lengths = _orient(vertices, triangles, edges, edge_elements)
    _readonly(vertices, triangles, edges, edge_elements, tags, n, tau, lengths, element_edges)
    return Mesh(vertices, triangles, edges, edge_elements, tags, n, tau, lengths, element_edges)


def _classify(vertices, edges, edge_elements, domain, edge_tags):
    tags = np.full(len(edges), INTERIOR, dtype="<U1")
    boundary = edge_elements[:, 1] < 0
    if edge_tags is not None:
        for i in np.flatnonzero(boundary):
            key = tuple(sorted(int(v) for v in edges[i]))
            tag = edge_tags.get(key)
            if tag not in (ROBIN, DIRICHLET):
                raise TopologyError(f"boundary edge {key} lacks an R/D tag")
            tags[i] = tag
        return tags
    if domain is None:
        raise MeshError("need a DomainSpec or explicit edge tags to classify boundary edges")
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    ends_outer = domain.on_outer_boundary(vertices[edges[:, 0]]) & domain.on_outer_boundary(vertices[edges[:, 1]])
    ends_hole = domain.on_hole_boundary(vertices[edges[:, 0]]) & domain.on_hole_boundary(vertices[edges[:, 1]])
    outer = ends_outer & domain.on_outer_boundary(mid)
    hole = ends_hole & domain.on_hole_boundary(mid)
    bad = boundary & ~outer & ~hole
    if np.any(bad):
        raise TopologyError(f"{bad.sum()} boundary edge(s) lie on neither the outer nor the hole boundary")
    tags[boundary & outer] = ROBIN
    tags[boundary & hole & ~outer] = DIRICHLET
    return tags


def classify_edges(mesh, domain):
    """Re-derive boundary tags of ``mesh`` from ``domain``."""
    return make_mesh(mesh.vertices, mesh.triangles, domain=domain)


def build_structured_mesh(domain, nx, ny=None):
    """Uniform right-triangle mesh; each cell is split along its lower-left to
    upper-right diagonal. A hole must have its corners on grid lines."""
    ny = nx if ny is None else ny
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    x0, y0, x1, y1 = domain.outer_box
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    keep = np.ones((nx, ny), dtype=bool)
    if domain.hole is not None:
        hx0, hy0, hx1, hy1 = domain.hole_box
        idx = []
        for val, origin, step in ((hx0, x0, hx), (hx1, x0, hx), (hy0, y0, hy), (hy1, y0, hy)):
            r = (val - origin) / step
            if abs(r - round(r)) > 1e-9:
                raise AlignmentError("hole corners must lie on grid lines")
            idx.append(int(round(r)))
        i0, i1, j0, j1 = idx
        keep[i0:i1, j0:j1] = False
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            if not keep[i, j]:
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = np.array(tris, dtype=np.int64)
    used = np.unique(tris)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return make_mesh(verts[used], remap[tris], domain=domain)


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    max_h_element: float
    min_h_element: float
    adjacency_ratio: float
    h: float
    below_threshold: bool
    threshold: float


def mesh_quality(mesh, min_angle_threshold=20.0):
    """Angles in degrees, element diameters and the local quasi-uniformity ratio."""
    v = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        a = v[:, (i + 1) % 3] - v[:, i]
        b = v[:, (i + 2) % 3] - v[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    min_angle = float(np.min(angles))
    diam = mesh.diameters()
    inter = mesh.interior
    if len(inter):
        hk = diam[mesh.edge_elements[inter]]
        ratio = float(np.max(np.maximum(hk[:, 0] / hk[:, 1], hk[:, 1] / hk[:, 0])))
    else:
        ratio = 1.0
    return MeshQuality(
        min_angle=min_angle,
        max_h_element=float(diam.max()),
        min_h_element=float(diam.min()),
        adjacency_ratio=ratio,
        h=mesh.h,
        below_threshold=min_angle < min_angle_threshold,
        threshold=min_angle_threshold,
    )


def read_mesh(path, domain=None):
    """Read the plain-text mesh format.

    Line 1 is ``V T E``; then ``V`` lines ``x y``, ``T`` lines ``i j k`` and
    ``E`` lines ``a b tag`` with tag in ``I``/``R``/``D``. With ``E == 0``
    boundary tags are inferred from ``domain``.
    """
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line.split())
    if not lines:
        raise MeshError("empty mesh file")
    head = [int(t) for t in lines[0]]
    if len(head) == 2:
        head.append(0)
    nv, nt, ne = head
    if len(lines) < 1 + nv + nt + ne:
        raise MeshError("mesh file truncated")
    verts = [[float(t) for t in row[:2]] for row in lines[1 : 1 + nv]]
    tris = [[int(t) for t in row[:3]] for row in lines[1 + nv : 1 + nv + nt]]
    tags = None
    if ne:
        tags = {}
        for row in lines[1 + nv + nt : 1 + nv + nt + ne]:
            a, b, tag = int(row[0]), int(row[1]), row[2].upper()
            if tag not in (INTERIOR, ROBIN, DIRICHLET):
                raise MeshError(f"unknown edge tag {tag!r}")
            tags[tuple(sorted((a, b)))] = tag
    mesh = make_mesh(verts, tris, domain=domain, edge_tags=tags)
    if tags is not None:
        listed = {k for k, t in tags.items()}
        derived = {tuple(sorted(int(v) for v in e)) for e in mesh.edges}
        if listed - derived:
            raise TopologyError("edge list contains edges not present in the triangulation")
        for i, e in enumerate(mesh.edges):
            key = tuple(sorted(int(v) for v in e))
            if key in tags and (tags[key] == INTERIOR) != (mesh.edge_tags[i] == INTERIOR):
                raise TopologyError(f"edge {key} tagged {tags[key]} but has {1 + (mesh.edge_elements[i, 1] >= 0)} neighbours")
    return mesh


def write_mesh(mesh, path):
    out = [f"{len(mesh.vertices)} {mesh.n_elements} {mesh.n_edges}"]
    out += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    out += [f"{a} {b} {t}" for (a, b), t in zip(mesh.edges, mesh.edge_tags)]
    Path(path).write_text("\n".join(out) + "\n")
