"""Assembly of the degree-dependent interior-penalty sesquilinear form

    a(u, v) = b(u, v) + i (L1(u, v) + J0(u, v) + ... + Jq(u, v)),

the mass and Robin boundary forms, and the load functional, as complex
sparse matrices.

Every matrix entry is ``A[i, j] = form(phi_j, phi_i)`` (trial column, test
row); the basis is real, so conjugation of the test function is a no-op for
the matrices and is applied explicitly when a form acts on complex fields.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from . import kernels
from .exact import robin_datum_for, source_for
from .mesh import DomainSpec
from .space import BasisField, as_field, directional


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty parameters; ``gammas = (gamma_0, ..., gamma_q)``, uniform over edges.

    All penalty terms enter the form multiplied by the imaginary unit.
    """

    q: int
    gammas: tuple
    beta1: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if self.q < 0:
            raise ConfigError("q must be nonnegative")
        if len(self.gammas) != self.q + 1:
            raise ConfigError(f"need q + 1 = {self.q + 1} penalty values, got {len(self.gammas)}")
        if any(not g > 0 for g in self.gammas):
            raise ConfigError("all gamma_j must be positive")
        if not self.beta1 >= 0:
            raise ConfigError("beta1 must be nonnegative")

    @property
    def gamma0(self):
        return self.gammas[0]

    def truncated(self, q):
        """Same parameters with the ladder cut at ``q``."""
        if not 0 <= q <= self.q:
            raise ConfigError("can only truncate to 0 <= q <= self.q")
        return replace(self, q=q, gammas=self.gammas[: q + 1])

    def check(self, p):
        if self.q > p:
            raise ConfigError(f"q = {self.q} exceeds the polynomial degree p = {p}")


def auto_penalty(h, p, q, c_gamma0=1.0, c_ladder=1.0, c_beta=1.0, sigma=1.0):
    """Penalty parameters following the uniform-mesh stability scalings.

    For ``q == p``: ``gamma_0 = p^(7/3) h^(-2/3)`` and
    ``gamma_j = p^(-10/3) h^(2/3) gamma_(j-1)``. For ``q < p``:
    ``gamma_0 = min(p^((3q+1)/(q+1)) h^(-q/(q+1)), p^(7/3) h^(-2/3))``,
    ``gamma_j = (gamma_0 h / p^4)^2 gamma_(j-1)`` and
    ``gamma_q <= 1 / (gamma_0 p^(2q-2))``. The ladder ``gamma_1..gamma_q`` is then
    scaled down uniformly if needed so that ``sum p^(2j-1) gamma_j <= 1``.
    ``beta_1 = (h^2 / p^4) gamma_0``. The ``c_*`` factors replace the unit
    values of the hidden constants.
    """
    if not 0 < h <= 1:
        raise ConfigError("auto penalty expects 0 < h <= 1")
    if not 0 <= q <= p:
        raise ConfigError("auto penalty expects 0 <= q <= p")
    g_full = p ** (7 / 3) * h ** (-2 / 3)
    if q == p:
        g0 = c_gamma0 * g_full
        ratio = c_ladder * p ** (-10 / 3) * h ** (2 / 3)
    else:
        g0 = c_gamma0 * min(p ** ((3 * q + 1) / (q + 1)) * h ** (-q / (q + 1)), g_full)
        ratio = c_ladder * (g0 * h / p**4) ** 2
    gammas = [g0]
    for _ in range(q):
        gammas.append(gammas[-1] * ratio)
    if q and q < p:
        cap = 1.0 / (g0 * p ** (2 * q - 2))
        gammas[q] = min(gammas[q], cap)
    if q:
        total = sum(p ** (2 * j - 1) * gammas[j] for j in range(1, q + 1))
        if total > 1.0:
            gammas[1:] = [g / total for g in gammas[1:]]
    return PenaltyConfig(q=q, gammas=tuple(gammas), beta1=c_beta * h**2 / p**4 * g0, sigma=sigma)


@dataclass(frozen=True)
class HelmholtzProblem:
    """``-Laplace u - k^2 u = f`` in the domain, ``du/dn + i k u = g`` on the
    outer boundary, ``u = 0`` on the hole boundary.

    ``f(x, y)`` and ``g(x, y, n)`` return complex arrays; ``n`` is the outward
    unit normal at the boundary points.
    """

    k: float
    f: object = None
    g: object = None
    domain: DomainSpec = field(default_factory=DomainSpec)

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError("wave number must be positive")

    @classmethod
    def from_exact(cls, u, k, domain=None):
        return cls(k=k, f=source_for(u, k), g=robin_datum_for(u, k), domain=domain or DomainSpec())


@dataclass
class ComplexSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray
    space: object
    cfg: PenaltyConfig | None = None

    def dump(self, path):
        """Write ``%%ComplexCOO rows cols nnz`` followed by ``row col re im`` lines."""
        dump_matrix(self.matrix, path)


def dump_matrix(matrix, path):
    coo = sps.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    rows, cols, vals = coo.row[order], coo.col[order], np.asarray(coo.data[order], dtype=complex)
    lines = [f"%%ComplexCOO {matrix.shape[0]} {matrix.shape[1]} {len(vals)}"]
    lines += [f"{r} {c} {float(v.real)!r} {float(v.imag)!r}" for r, c, v in zip(rows, cols, vals)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path):
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] != "%%ComplexCOO":
        raise ValueError("not a ComplexCOO file")
    n, m, nnz = (int(t) for t in head[1:])
    data = np.array([ln.split() for ln in lines[1 : 1 + nnz]], dtype=float).reshape(-1, 4)
    vals = data[:, 2] + 1j * data[:, 3]
    return sps.csr_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, m))


# edge stacks ---------------------------------------------------------------

def _edge_feature(field, space, batch, side, feature):
    """Trace of a named feature: ``v``, ``dt`` or ``dn<j>``."""
    edges = space.batch(batch)
    if feature == "v":
        return field.trace(space, batch, side, 0, 0)
    if feature == "dt":
        return directional(field, space, batch, side, space.mesh.tangents[edges], 1)
    if feature.startswith("dn"):
        return directional(field, space, batch, side, space.mesh.normals[edges], int(feature[2:]))
    raise KeyError(feature)


def jump_average(field, space, batch, feature):
    """``([F], {F})`` on a batch of edges.

    For the basis the two sides are stacked along the last axis (plus dofs
    first), with the jump sign folded in; for scalar fields they are combined.
    """
    f0 = _edge_feature(field, space, batch, 0, feature)
    if batch != "I":
        return f0, f0
    f1 = _edge_feature(field, space, batch, 1, feature)
    if getattr(field, "is_basis", False):
        return np.concatenate([f0, -f1], axis=-1), 0.5 * np.concatenate([f0, f1], axis=-1)
    return f0 - f1, 0.5 * (f0 + f1)


def edge_dofs(space, batch):
    edges = space.batch(batch)
    plus = space.dofs(space.mesh.edge_elements[edges, 0])
    if batch != "I":
        return plus
    return np.concatenate([plus, space.dofs(space.mesh.edge_elements[edges, 1])], axis=-1)


def _sparse(space, blocks, rows, cols):
    n = space.n_dofs
    if len(blocks) == 0:
        return sps.csr_matrix((n, n))
    r = np.broadcast_to(rows[:, :, None], blocks.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], blocks.shape).ravel()
    return sps.csr_matrix((blocks.ravel(), (r, c)), shape=(n, n))


def _edge_weight(space, batch, scale=None):
    edges = space.batch(batch)
    w = space.edge_weights(edges)
    if scale is not None:
        w = w * scale[:, None]
    return w


def penalty_scales(space, cfg, batch):
    """Per-edge weights of J0, L1 and J1..Jq on a batch."""
    h = space.mesh.lengths[space.batch(batch)]
    p = space.p
    out = {"J0": cfg.gamma0 * p / h, "L1": cfg.beta1 * p / h}
    for j in range(1, cfg.q + 1):
        out[f"J{j}"] = cfg.gammas[j] * (h / p) ** (2 * j - 1)
    return out


def term_names(cfg):
    return ["stiffness", "flux", "symmetry", "L1"] + [f"J{j}" for j in range(cfg.q + 1)]


def assemble_terms(space, cfg):
    """Real sparse matrices of each piece of the form.

    ``flux`` is ``-<{du/dn}, [v]>`` and ``symmetry`` is ``-<[u], {dv/dn}>``
    (without ``sigma``), both over interior and Dirichlet edges. ``J0``/``L1``
    run over interior and Dirichlet edges, ``J1..Jq`` over interior edges only.
    """
    cfg.check(space.p)
    basis = BasisField()
    terms = {}

    gx, gy = space.volume_table(1, 0), space.volume_table(0, 1)
    w = space.volume_weights
    stiff = kernels.weighted_products(w, gx, gx) + kernels.weighted_products(w, gy, gy)
    d = space.dofs(np.arange(space.mesh.n_elements))
    terms["stiffness"] = _sparse(space, stiff, d, d)

    acc = {name: [] for name in term_names(cfg) if name != "stiffness"}
    for batch in ("I", "D"):
        if len(space.batch(batch)) == 0:
            continue
        dofs = edge_dofs(space, batch)
        w = _edge_weight(space, batch)
        scales = penalty_scales(space, cfg, batch)
        jv, _ = jump_average(basis, space, batch, "v")
        _, adn = jump_average(basis, space, batch, "dn1")
        acc["flux"].append(_sparse(space, -kernels.weighted_products(w, jv, adn), dofs, dofs))
        acc["symmetry"].append(_sparse(space, -kernels.weighted_products(w, adn, jv), dofs, dofs))
        acc["J0"].append(_sparse(space, kernels.weighted_products(w * scales["J0"][:, None], jv, jv), dofs, dofs))
        if cfg.beta1 > 0:
            jt, _ = jump_average(basis, space, batch, "dt")
            acc["L1"].append(_sparse(space, kernels.weighted_products(w * scales["L1"][:, None], jt, jt), dofs, dofs))
        if batch == "I":
            for j in range(1, cfg.q + 1):
                jn, _ = jump_average(basis, space, batch, f"dn{j}")
                ws = w * scales[f"J{j}"][:, None]
                acc[f"J{j}"].append(_sparse(space, kernels.weighted_products(ws, jn, jn), dofs, dofs))
    n = space.n_dofs
    for name, mats in acc.items():
        terms[name] = sum(mats[1:], mats[0]) if mats else sps.csr_matrix((n, n))
    return terms


def combine(terms, cfg):
    """``b + i (L1 + J0 + ... + Jq)`` from term matrices or term vectors."""
    real = terms["stiffness"] + terms["flux"] + cfg.sigma * terms["symmetry"]
    imag = terms["L1"]
    for j in range(cfg.q + 1):
        imag = imag + terms[f"J{j}"]
    return real + 1j * imag


def assemble_ahq(space, cfg, terms=None):
    """Complex sparse matrix of the sesquilinear form ``a_h^q``."""
    terms = assemble_terms(space, cfg) if terms is None else terms
    return sps.csr_matrix(combine(terms, cfg))


def assemble_mass(space):
    phi = space.volume_table(0, 0)
    m = kernels.weighted_products(space.volume_weights, phi, phi)
    d = space.dofs(np.arange(space.mesh.n_elements))
    return _sparse(space, m, d, d).astype(complex)


def assemble_robin(space):
    """``<u, v>`` over the outer (Robin) boundary only."""
    if len(space.batch("R")) == 0:
        return sps.csr_matrix((space.n_dofs, space.n_dofs), dtype=complex)
    v = space.edge_table("R", 0, 0, 0)
    m = kernels.weighted_products(_edge_weight(space, "R"), v, v)
    d = edge_dofs(space, "R")
    return _sparse(space, m, d, d).astype(complex)


def assemble_load(space, problem):
    """``(f, v) + <g, v>`` over the outer boundary."""
    b = np.zeros(space.n_dofs, dtype=complex)
    if problem.f is not None:
        x = space.volume_points
        f = np.asarray(problem.f(x[..., 0], x[..., 1]), dtype=complex)
        f = np.broadcast_to(f, x.shape[:-1])
        b += np.einsum("kq,kq,kqi->ki", space.volume_weights, f, space.volume_table(0, 0)).ravel()
    edges = space.batch("R")
    if problem.g is not None and len(edges):
        x = space.edge_points(edges)
        n = np.broadcast_to(space.mesh.normals[edges][:, None, :], x.shape)
        g = np.broadcast_to(np.asarray(problem.g(x[..., 0], x[..., 1], n), dtype=complex), x.shape[:-1])
        loc = np.einsum("eq,eq,eqi->ei", space.edge_weights(edges), g, space.edge_table("R", 0, 0, 0))
        np.add.at(b, edge_dofs(space, "R"), loc)
    return b


def assemble_system(problem, space, cfg, terms=None):
    """``A = a_h^q - k^2 M + i k B`` and the load vector."""
    k = problem.k
    A = assemble_ahq(space, cfg, terms) - k**2 * assemble_mass(space) + 1j * k * assemble_robin(space)
    return ComplexSystem(sps.csr_matrix(A), assemble_load(space, problem), space, cfg)


# forms acting on general fields -------------------------------------------

def _test_vector(space, contrib, dofs):
    out = np.zeros(space.n_dofs, dtype=complex)
    np.add.at(out, dofs, contrib)
    return out


def _require_order(u, order):
    have = getattr(u, "max_order", None)
    if have is not None and have < order:
        raise ConfigError(f"field provides derivatives up to order {have}, need {order}")


def term_actions(u, space, cfg):
    """Vectors ``r[name][i] = term(u, phi_i)`` for a scalar field ``u``.

    For a discrete ``u`` these equal ``assemble_terms(...)[name] @ coefficients``.
    """
    cfg.check(space.p)
    _require_order(u, max(cfg.q, 1))
    u = as_field(u)
    basis = BasisField()
    out = {}
    w = space.volume_weights
    vol = np.einsum("kq,kq,kqi->ki", w, u.volume(space, 1, 0), space.volume_table(1, 0))
    vol += np.einsum("kq,kq,kqi->ki", w, u.volume(space, 0, 1), space.volume_table(0, 1))
    out["stiffness"] = vol.ravel().astype(complex)
    names = [n for n in term_names(cfg) if n != "stiffness"]
    acc = {n: np.zeros(space.n_dofs, dtype=complex) for n in names}
    for batch in ("I", "D"):
        if len(space.batch(batch)) == 0:
            continue
        dofs = edge_dofs(space, batch)
        w = _edge_weight(space, batch)
        scales = penalty_scales(space, cfg, batch)
        jv, adn = jump_average(basis, space, batch, "v")[0], jump_average(basis, space, batch, "dn1")[1]
        uj, _ = jump_average(u, space, batch, "v")
        _, uadn = jump_average(u, space, batch, "dn1")
        acc["flux"] += _test_vector(space, -np.einsum("eq,eq,eqi->ei", w, uadn, jv), dofs)
        acc["symmetry"] += _test_vector(space, -np.einsum("eq,eq,eqi->ei", w, uj, adn), dofs)
        acc["J0"] += _test_vector(space, np.einsum("eq,eq,eqi->ei", w * scales["J0"][:, None], uj, jv), dofs)
        if cfg.beta1 > 0:
            jt, _ = jump_average(basis, space, batch, "dt")
            ut, _ = jump_average(u, space, batch, "dt")
            acc["L1"] += _test_vector(space, np.einsum("eq,eq,eqi->ei", w * scales["L1"][:, None], ut, jt), dofs)
        if batch == "I":
            for j in range(1, cfg.q + 1):
                jn, _ = jump_average(basis, space, batch, f"dn{j}")
                un, _ = jump_average(u, space, batch, f"dn{j}")
                ws = w * scales[f"J{j}"][:, None]
                acc[f"J{j}"] += _test_vector(space, np.einsum("eq,eq,eqi->ei", ws, un, jn), dofs)
    out.update(acc)
    return out


def form_action(u, space, cfg):
    """``r[i] = a_h^q(u, phi_i)``."""
    return combine(term_actions(u, space, cfg), cfg)


def mass_action(u, space):
    u = as_field(u)
    loc = np.einsum("kq,kq,kqi->ki", space.volume_weights, u.volume(space, 0, 0), space.volume_table(0, 0))
    return loc.ravel().astype(complex)


def robin_action(u, space):
    u = as_field(u)
    edges = space.batch("R")
    out = np.zeros(space.n_dofs, dtype=complex)
    if len(edges):
        loc = np.einsum("eq,eq,eqi->ei", space.edge_weights(edges), u.trace(space, "R", 0, 0, 0), space.edge_table("R", 0, 0, 0))
        np.add.at(out, edge_dofs(space, "R"), loc)
    return out


def assemble_projection_system(u, space, cfg, k, terms=None):
    """Elliptic projection: ``(a_h^q + i k B) w_h = a_h^q(u, .) + i k <u, .>``."""
    _require_order(u, cfg.q + 1)
    A = assemble_ahq(space, cfg, terms) + 1j * k * assemble_robin(space)
    rhs = form_action(u, space, cfg) + 1j * k * robin_action(u, space)
    return ComplexSystem(sps.csr_matrix(A), rhs, space, cfg)
