"""Broken norms, discrete identities and stability diagnostics for DG functions."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import (
    assemble_load,
    combine,
    form_action,
    jump_average,
    mass_action,
    penalty_scales,
    robin_action,
    term_actions,
)
from .space import Difference, DGFunction, ExactField, as_field, gradient


@dataclass(frozen=True)
class NormReport:
    seminorm_1h: float
    norm_1hq: float
    triple: float
    l2: float
    l2_robin: float
    components: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def _sq(x):
    return np.abs(x) ** 2


def _edge_sum(space, batch, values, scale=None):
    if len(space.batch(batch)) == 0:
        return 0.0
    w = space.edge_weights(space.batch(batch))
    if scale is not None:
        w = w * scale[:, None]
    return float(np.sum(w * values))


def norms(v, space, cfg):
    """Broken H1 seminorm, the penalty-weighted norm, the triple norm (adds the
    normal-flux average term) and L2 norms on the domain and outer boundary."""
    cfg.check(space.p)
    u = as_field(v)
    w = space.volume_weights
    semi = float(np.sum(w * (_sq(u.volume(space, 1, 0)) + _sq(u.volume(space, 0, 1)))))
    comp = {"J0": 0.0, "L1": 0.0, "flux_average": 0.0}
    comp.update({f"J{j}": 0.0 for j in range(1, cfg.q + 1)})
    for batch in ("I", "D"):
        if len(space.batch(batch)) == 0:
            continue
        sc = penalty_scales(space, cfg, batch)
        jv, _ = jump_average(u, space, batch, "v")
        _, adn = jump_average(u, space, batch, "dn1")
        comp["J0"] += _edge_sum(space, batch, _sq(jv), sc["J0"])
        if cfg.beta1 > 0:
            jt, _ = jump_average(u, space, batch, "dt")
            comp["L1"] += _edge_sum(space, batch, _sq(jt), sc["L1"])
        h = space.mesh.lengths[space.batch(batch)]
        comp["flux_average"] += _edge_sum(space, batch, _sq(adn), h / (cfg.gamma0 * space.p))
        if batch == "I":
            for j in range(1, cfg.q + 1):
                jn, _ = jump_average(u, space, batch, f"dn{j}")
                comp[f"J{j}"] += _edge_sum(space, batch, _sq(jn), sc[f"J{j}"])
    penalty = comp["J0"] + comp["L1"] + sum(comp[f"J{j}"] for j in range(1, cfg.q + 1))
    l2 = float(np.sum(w * _sq(u.volume(space, 0, 0))))
    robin = _edge_sum(space, "R", _sq(u.trace(space, "R", 0, 0, 0))) if len(space.batch("R")) else 0.0
    comp["seminorm_sq"] = semi
    comp["penalty_sq"] = penalty
    return NormReport(
        seminorm_1h=np.sqrt(semi),
        norm_1hq=np.sqrt(semi + penalty),
        triple=np.sqrt(semi + penalty + comp["flux_average"]),
        l2=np.sqrt(l2),
        l2_robin=np.sqrt(robin),
        components=comp,
    )


def error_vs_exact(uh, u_exact, space, cfg, exactness=None):
    """Norms of ``u_exact - uh`` with quadrature of exactness ``2p + 4``."""
    s = space.with_exactness(2 * space.p + 4 if exactness is None else exactness)
    return norms(Difference(ExactField(u_exact), uh), s, cfg)


def random_dg_function(space, rng):
    c = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)
    return DGFunction(space, c)


def form_split_residuals(v, space, cfg, A):
    """Compare ``Re a(v,v)`` and ``Im a(v,v)`` from the matrix ``A`` against
    independently accumulated seminorm, flux and penalty terms.

    Returns relative residuals ``(re, im)`` and the value of ``Im a(v, v)``.
    """
    c = v.coefficients
    a = np.vdot(c, A @ c)
    rep = norms(v, space, cfg)
    flux = 0.0
    for batch in ("I", "D"):
        if len(space.batch(batch)) == 0:
            continue
        jv, _ = jump_average(v, space, batch, "v")
        _, adn = jump_average(v, space, batch, "dn1")
        flux += np.sum(space.edge_weights(space.batch(batch)) * adn * np.conj(jv))
    re_expected = rep.components["seminorm_sq"] - 2.0 * np.real(flux)
    im_expected = rep.components["penalty_sq"]
    re_scale = rep.components["seminorm_sq"] + 2.0 * abs(flux)
    im_scale = max(im_expected, 1e-300)
    return abs(a.real - re_expected) / re_scale, abs(a.imag - im_expected) / im_scale, a.imag


def rellich_check(v, space, domain, exactness=None):
    """Residuals of the elementwise Rellich-type identities (d = 2)

    * ``2 ||v||_K^2 + 2 Re(v, alpha.grad v)_K = int_dK alpha.n |v|^2``
    * ``2 Re(grad v, grad(alpha.grad v))_K = int_dK alpha.n |grad v|^2``
    * on each interior/Dirichlet edge,
      ``<{dv/dn}, [alpha.grad v]> - <alpha.n {grad v}, [grad v]>
      = int (alpha.tau {dv/dn} - alpha.n {dv/dtau}) conj([dv/dtau])``

    with ``alpha = x - x_center``. Returns ``{name: max relative residual}``
    plus per-element/per-edge absolute residual arrays under ``name + "_abs"``.
    """
    s = space.with_exactness(2 * space.p + 3 if exactness is None else exactness)
    u = as_field(v)
    mesh = s.mesh
    nk = mesh.n_elements
    x = s.volume_points
    alpha = domain.alpha(x)
    w = s.volume_weights
    val = u.volume(s, 0, 0)
    gx, gy = u.volume(s, 1, 0), u.volume(s, 0, 1)
    hxx, hxy, hyy = u.volume(s, 2, 0), u.volume(s, 1, 1), u.volume(s, 0, 2)
    adg = alpha[..., 0] * gx + alpha[..., 1] * gy
    # grad(alpha . grad v) = grad v + Hess(v) alpha
    ggx = gx + hxx * alpha[..., 0] + hxy * alpha[..., 1]
    ggy = gy + hxy * alpha[..., 0] + hyy * alpha[..., 1]
    lhs1 = np.sum(w * (2.0 * _sq(val) + 2.0 * np.real(val * np.conj(adg))), axis=1)
    lhs2 = np.sum(w * 2.0 * np.real(gx * np.conj(ggx) + gy * np.conj(ggy)), axis=1)
    scale1 = np.sum(w * (2.0 * _sq(val) + 2.0 * np.abs(val * adg)), axis=1)
    scale2 = np.sum(w * 2.0 * np.abs(gx * np.conj(ggx) + gy * np.conj(ggy)), axis=1)
    rhs1 = np.zeros(nk)
    rhs2 = np.zeros(nk)
    for batch in ("I", "R", "D"):
        edges = s.batch(batch)
        if len(edges) == 0:
            continue
        ew = s.edge_weights(edges)
        xa = domain.alpha(s.edge_points(edges))
        for side, sign in ((0, 1.0), (1, -1.0)):
            if side == 1 and batch != "I":
                continue
            an = sign * np.einsum("eqi,ei->eq", xa, mesh.normals[edges])
            tv = u.trace(s, batch, side, 0, 0)
            tg = gradient(u, s, batch, side)
            el = mesh.edge_elements[edges, side]
            np.add.at(rhs1, el, np.sum(ew * an * _sq(tv), axis=1))
            np.add.at(rhs2, el, np.sum(ew * an * np.sum(_sq(tg), axis=-1), axis=1))
    res1 = np.abs(lhs1 - rhs1)
    res2 = np.abs(lhs2 - rhs2)

    res3, scale3 = [], []
    for batch in ("I", "D"):
        edges = s.batch(batch)
        if len(edges) == 0:
            continue
        n, tau = mesh.normals[edges], mesh.tangents[edges]
        ew = s.edge_weights(edges)
        xa = domain.alpha(s.edge_points(edges))
        an = np.einsum("eqi,ei->eq", xa, n)
        at = np.einsum("eqi,ei->eq", xa, tau)
        sides = [0, 1] if batch == "I" else [0]
        grads = [gradient(u, s, batch, sd) for sd in sides]
        adgs = [np.sum(xa * g, axis=-1) for g in grads]
        dns = [np.einsum("eqi,ei->eq", g, n) for g in grads]
        dts = [np.einsum("eqi,ei->eq", g, tau) for g in grads]
        if batch == "I":
            jump = lambda f: f[0] - f[1]
            avg = lambda f: 0.5 * (f[0] + f[1])
        else:
            jump = avg = lambda f: f[0]
        avg_grad, jump_grad = avg(grads), jump(grads)
        t1 = avg(dns) * np.conj(jump(adgs))
        t2 = an * np.sum(avg_grad * np.conj(jump_grad), axis=-1)
        t3 = (at * avg(dns) - an * avg(dts)) * np.conj(jump(dts))
        lhs = np.sum(ew * (t1 - t2), axis=1)
        rhs = np.sum(ew * t3, axis=1)
        res3.append(np.abs(lhs - rhs))
        # every term is bilinear in ({grad v}, [grad v]) with weight alpha
        size = np.linalg.norm(xa, axis=-1) * np.sum(_sq(avg_grad) + _sq(jump_grad), axis=-1)
        scale3.append(np.sum(ew * size, axis=1))
    res3 = np.concatenate(res3) if res3 else np.zeros(0)
    scale3 = np.concatenate(scale3) if scale3 else np.zeros(0)

    def rel(res, scale):
        if len(res) == 0:
            return 0.0
        tot = scale.max()
        return float(res.max() / tot) if tot > 0 else float(res.max())

    return {
        "eid1": rel(res1, scale1),
        "eid2": rel(res2, scale2),
        "eid3": rel(res3, scale3),
        "eid1_abs": res1,
        "eid2_abs": res2,
        "eid3_abs": res3,
    }


def consistency_residual(u, problem, space, cfg, exactness=None):
    """``max_i |a(u, phi_i) - k^2 (u, phi_i) + i k <u, phi_i> - (f, phi_i) - <g, phi_i>|``
    divided by the largest magnitude of any of those terms."""
    s = space.with_exactness(2 * space.p + 6 if exactness is None else exactness)
    k = problem.k
    parts = [
        form_action(u, s, cfg),
        -(k**2) * mass_action(u, s),
        1j * k * robin_action(u, s),
        -assemble_load(s, problem),
    ]
    total = sum(parts)
    scale = max(np.abs(t).max() for t in parts)
    if scale == 0:
        return 0.0
    return float(np.abs(total).max() / scale)


def galerkin_orthogonality_residual(u, uh, space, cfg, k):
    """``max_i |a(u - uh, phi_i) + i k <u - uh, phi_i>|`` relative to the
    magnitude of ``a(u, phi_i) + i k <u, phi_i>``."""
    ref = form_action(u, space, cfg) + 1j * k * robin_action(u, space)
    disc = form_action(uh, space, cfg) + 1j * k * robin_action(uh, space)
    scale = np.abs(ref).max()
    if scale == 0:
        return float(np.abs(disc).max())
    return float(np.abs(ref - disc).max() / scale)


def stability_constant(space, cfg, k):
    """The stability constant evaluated with unit hidden constants.

    Terms that need ``gamma_1`` are dropped when ``q == 0``.
    """
    mesh = space.mesh
    p, q = space.p, cfg.q
    g = cfg.gammas
    b1 = cfg.beta1
    c = 1.0 / k + 1.0 / k**2
    hd = mesh.lengths[mesh.dirichlet]
    if len(hd):
        d = g[0] * p / hd + p**5 / (g[0] * hd**2) + b1 * p**5 / hd**3 + p**2 / hd
        c += d.max() / k**2
    hi = mesh.lengths[mesh.interior]
    if len(hi):
        ladder = max((np.sqrt(g[j] / g[j + 1]) for j in range(q)), default=0.0)
        t = (p * k**2 * hi**2 + p**5) / (g[0] * hi**2) + p / hi * ladder + p**2 / hi
        if q >= 1:
            t = t + p**3 / hi**2 * np.sqrt(b1 / g[1])
        if q < p:
            t = t + g[q] * p ** (2 * q + 3) / hi**2
        c += t.max() / k**2
    return float(c)


@dataclass(frozen=True)
class StabilityReport:
    data_norm: float
    csta: float
    lam: float
    lhs: float
    ratio: float
    ratio_1hq: float
    ratio_l2: float
    norm_1hq: float
    l2: float
    l2_robin: float
    flux_robin: float
    flux_dirichlet: float
    zero_data: bool

    def as_dict(self):
        return asdict(self)


def data_norm(problem, space, exactness=None):
    """``||f||_Omega + ||g||_{Gamma_R}`` by quadrature."""
    s = space.with_exactness(2 * space.p + 4 if exactness is None else exactness)
    total = 0.0
    if problem.f is not None:
        x = s.volume_points
        f = np.broadcast_to(np.asarray(problem.f(x[..., 0], x[..., 1]), dtype=complex), x.shape[:-1])
        total += np.sqrt(np.sum(s.volume_weights * _sq(f)))
    edges = s.batch("R")
    if problem.g is not None and len(edges):
        x = s.edge_points(edges)
        n = np.broadcast_to(s.mesh.normals[edges][:, None, :], x.shape)
        g = np.broadcast_to(np.asarray(problem.g(x[..., 0], x[..., 1], n), dtype=complex), x.shape[:-1])
        total += np.sqrt(np.sum(s.edge_weights(edges) * _sq(g)))
    return float(total)


def stability_report(uh, problem, space, cfg):
    """Left side of the a priori bound, the stability constant and ratios.

    Zero data gives zero ratios with ``zero_data`` set.
    """
    k = problem.k
    dom = problem.domain
    rep = norms(uh, space, cfg)
    M = data_norm(problem, space)
    u = as_field(uh)

    def grad_sq(batch):
        edges = space.batch(batch)
        if len(edges) == 0:
            return 0.0
        return _edge_sum(space, batch, np.sum(_sq(gradient(u, space, batch, 0)), axis=-1))

    flux_r = np.sqrt(dom.c_outer * grad_sq("R"))
    d_val = _edge_sum(space, "D", _sq(u.trace(space, "D", 0, 0, 0))) if len(space.batch("D")) else 0.0
    flux_d = np.sqrt(dom.c_hole * (k**2 * d_val + grad_sq("D")))
    lhs = rep.l2 + rep.norm_1hq / k + rep.l2_robin + flux_r / k + flux_d / k
    csta = stability_constant(space, cfg, k)
    zero = M == 0.0
    return StabilityReport(
        data_norm=M,
        csta=csta,
        lam=1.0 + space.p / cfg.gamma0,
        lhs=float(lhs),
        ratio=0.0 if zero else float(lhs / (csta * M)),
        ratio_1hq=0.0 if zero else float(rep.norm_1hq / M),
        ratio_l2=0.0 if zero else float(k * rep.l2 / M),
        norm_1hq=float(rep.norm_1hq),
        l2=float(rep.l2),
        l2_robin=float(rep.l2_robin),
        flux_robin=float(flux_r),
        flux_dirichlet=float(flux_d),
        zero_data=zero,
    )


def estimate_coercivity_constant(space, cfg, A, samples=50, seed=0):
    """Smallest ``c`` with ``Re a(v,v) + c Im a(v,v) >= ||v||_{1,h,q}^2 / 2`` over
    sampled discrete functions (an empirical stand-in for an existential constant)."""
    rng = np.random.default_rng(seed)
    c = 0.0
    for _ in range(samples):
        v = random_dg_function(space, rng)
        a = np.vdot(v.coefficients, A @ v.coefficients)
        n2 = norms(v, space, cfg).norm_1hq ** 2
        if a.imag > 0:
            c = max(c, (0.5 * n2 - a.real) / a.imag)
    return float(c)


__all__ = [
    "NormReport",
    "StabilityReport",
    "combine",
    "consistency_residual",
    "data_norm",
    "error_vs_exact",
    "estimate_coercivity_constant",
    "form_split_residuals",
    "galerkin_orthogonality_residual",
    "norms",
    "random_dg_function",
    "rellich_check",
    "stability_constant",
    "stability_report",
    "term_actions",
]
