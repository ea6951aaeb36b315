"""Dense reference assembly written independently of the package internals.

Basis functions are built by symbolic Gram-Schmidt (sympy integration over
the reference triangle), pushed to each physical element symbolically, and
every block is integrated with tensor Gauss-Legendre rules (collapsed on
triangles) far above the needed exactness, one entry at a time.
"""

from functools import lru_cache
import numpy as np
import sympy as sp

X, Y = sp.symbols("x y", real=True)
XI, ETA = sp.symbols("xi eta", real=True)


@lru_cache(maxsize=None)
def reference_basis(p):
    def ip(f, g):
        inner = sp.Poly(f * g, XI, ETA).integrate(ETA).as_expr()
        outer = sp.Poly(inner.subs(ETA, 1 - XI) - inner.subs(ETA, 0), XI).integrate()
        return outer.eval(1) - outer.eval(0)

    monos = [XI ** (n - b) * ETA**b for n in range(p + 1) for b in range(n + 1)]
    out = []
    for m in monos:
        v = m - sum(ip(m, e) * e for e in out)
        out.append(sp.expand(v / sp.sqrt(ip(v, v))))
    return out


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_points(verts, n=14):
    s, ws = _gl(n)
    S, T = np.meshgrid(s, s, indexing="ij")
    W = np.outer(ws, ws) * (1.0 - S)
    xi, eta = S.ravel(), ((1.0 - S) * T).ravel()
    v0, v1, v2 = verts
    d1, d2 = v1 - v0, v2 - v0
    det = abs(d1[0] * d2[1] - d1[1] * d2[0])
    pts = v0 + np.outer(xi, v1 - v0) + np.outer(eta, v2 - v0)
    return pts, W.ravel() * det


def edge_points(a, b, n=14):
    t, w = _gl(n)
    return a + np.outer(t, b - a), w * np.linalg.norm(b - a)


class ElementBasis:
    """Physical basis of one element with symbolic derivatives on demand."""

    def __init__(self, verts, p):
        v0, v1, v2 = (sp.Matrix([sp.nsimplify(c) for c in v]) for v in verts)
        J = sp.Matrix.hstack(v1 - v0, v2 - v0)
        ref = J.inv() * (sp.Matrix([X, Y]) - v0)
        self.funcs = [sp.expand(f.subs({XI: ref[0], ETA: ref[1]}, simultaneous=True)) for f in reference_basis(p)]
        self._cache = {}

    def directional(self, i, direction, order):
        """``(d . grad)^order phi_i`` as a numpy callable."""
        key = (i, tuple(direction), order)
        if key not in self._cache:
            f = self.funcs[i]
            dx, dy = (sp.Float(float(c), 20) for c in direction) if order else (0, 0)
            for _ in range(order):
                f = dx * sp.diff(f, X) + dy * sp.diff(f, Y)
            fn = sp.lambdify((X, Y), f, "numpy")
            self._cache[key] = lambda x, y, fn=fn: np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.shape(x))
        return self._cache[key]

    def grad(self, i):
        gx = self.directional(i, (1, 0), 1)
        gy = self.directional(i, (0, 1), 1)
        return gx, gy


def oracle_blocks(mesh, p, cfg, f=None, g=None):
    """Dense matrices ``stiffness, flux, symmetry, L1, J0..Jq, mass, robin`` and the load."""
    nel = mesh.n_elements
    dim = (p + 1) * (p + 2) // 2
    n = nel * dim
    elems = [ElementBasis(mesh.vertices[t], p) for t in mesh.triangles]
    names = ["stiffness", "flux", "symmetry", "L1"] + [f"J{j}" for j in range(cfg.q + 1)] + ["mass", "robin"]
    out = {name: np.zeros((n, n)) for name in names}
    load = np.zeros(n, dtype=complex)

    for K, eb in enumerate(elems):
        pts, w = triangle_points(mesh.vertices[mesh.triangles[K]])
        vals = [eb.directional(i, (0, 0), 0)(pts[:, 0], pts[:, 1]) for i in range(dim)]
        grads = [[g_(pts[:, 0], pts[:, 1]) for g_ in eb.grad(i)] for i in range(dim)]
        for i in range(dim):
            for j in range(dim):
                r, c = K * dim + i, K * dim + j
                out["mass"][r, c] = np.sum(w * vals[i] * vals[j])
                out["stiffness"][r, c] = np.sum(w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]))
            if f is not None:
                load[K * dim + i] += np.sum(w * f(pts[:, 0], pts[:, 1]) * vals[i])

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    for e, (a_id, b_id) in enumerate(mesh.edges):
        a, b = mesh.vertices[a_id], mesh.vertices[b_id]
        pts, w = edge_points(a, b)
        he = np.linalg.norm(b - a)
        owners = [int(k) for k in mesh.edge_elements[e] if k >= 0]
        plus = max(owners)
        t = (b - a) / he
        nrm = np.array([t[1], -t[0]])
        if np.dot(0.5 * (a + b) - centroids[plus], nrm) < 0:
            nrm = -nrm
        tau = np.array([-nrm[1], nrm[0]])
        tag = mesh.edge_tags[e]
        sides = [plus] + [k for k in owners if k != plus]
        x, y = pts[:, 0], pts[:, 1]

        # (element, jump sign, average weight) for each side
        if tag == "I":
            roles = [(sides[0], 1.0, 0.5), (sides[1], -1.0, 0.5)]
        else:
            roles = [(sides[0], 1.0, 1.0)]
        if tag == "R":
            K = sides[0]
            for i in range(dim):
                vi = elems[K].directional(i, (0, 0), 0)(x, y)
                for j in range(dim):
                    vj = elems[K].directional(j, (0, 0), 0)(x, y)
                    out["robin"][K * dim + i, K * dim + j] += np.sum(w * vi * vj)
                if g is not None:
                    nn = np.broadcast_to(nrm, pts.shape)
                    load[K * dim + i] += np.sum(w * g(x, y, nn) * vi)
            continue

        def feature(K, i, kind, order=1):
            eb = elems[K]
            if kind == "v":
                return eb.directional(i, (0, 0), 0)(x, y)
            if kind == "t":
                return eb.directional(i, tau, 1)(x, y)
            return eb.directional(i, nrm, order)(x, y)

        for Ka, ja, aa in roles:
            for Kb, jb, ab in roles:
                for i in range(dim):  # test function on element Ka
                    for j in range(dim):  # trial function on element Kb
                        r, c = Ka * dim + i, Kb * dim + j
                        vt, vu = feature(Ka, i, "v"), feature(Kb, j, "v")
                        nt, nu = feature(Ka, i, "n"), feature(Kb, j, "n")
                        # -<{du/dn}, [v]>  and  -<[u], {dv/dn}>
                        out["flux"][r, c] -= np.sum(w * ab * nu * ja * vt)
                        out["symmetry"][r, c] -= np.sum(w * jb * vu * aa * nt)
                        out["J0"][r, c] += cfg.gammas[0] * p / he * np.sum(w * jb * vu * ja * vt)
                        if cfg.beta1 > 0:
                            tt, tu = feature(Ka, i, "t"), feature(Kb, j, "t")
                            out["L1"][r, c] += cfg.beta1 * p / he * np.sum(w * jb * tu * ja * tt)
                        if tag == "I":
                            for q in range(1, cfg.q + 1):
                                dt, du = feature(Ka, i, "n", q), feature(Kb, j, "n", q)
                                wq = cfg.gammas[q] * (he / p) ** (2 * q - 1)
                                out[f"J{q}"][r, c] += wq * np.sum(w * jb * du * ja * dt)
    return out, load

