"""Command-line driver: single solves, identity verification, convergence
tables and wave-number sweeps.

Examples::

    hpdg verify --p 3 --nx 8 --k 5
    hpdg converge --exact planewave --k 5 --p 1,2,3 --nx 4,8,16,32
    hpdg ksweep --p 1 --rule k3h2p=1 --k 5,10,20
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .assembly import (
    ConfigError,
    HelmholtzProblem,
    PenaltyConfig,
    assemble_projection_system,
    assemble_system,
    assemble_terms,
    auto_penalty,
    combine,
)
from .exact import box_bubble, parse_exact
from .mesh import DomainSpec, MeshError, build_structured_mesh, read_mesh
from .solver import SolverError, solve
from .space import Space

log = logging.getLogger("hpdg")

CONVERGENCE_HEADER = ["k", "p", "q", "h", "dofs", "err_l2", "err_1hq", "eoc_l2", "eoc_1hq", "csta_ratio", "residual", "seconds"]
KSWEEP_HEADER = ["k", "p", "q", "h", "dofs", "rule", "data_norm", "norm_1hq", "ratio_1hq", "ratio_l2", "csta_ratio", "residual", "seconds"]
VERIFY_HEADER = ["check", "p", "q", "nx", "value", "tol", "passed"]
MODES = ("solve", "verify", "converge", "ksweep")


class UsageError(ValueError):
    pass


@dataclass
class StudySpec:
    mode: str = "solve"
    ks: list = field(default_factory=lambda: [5.0])
    ps: list = field(default_factory=lambda: [1])
    q: int | None = None  # None means q = p
    nxs: list = field(default_factory=lambda: [8])
    rule: tuple | None = None  # ("kh" | "k3h2p", [constants])
    penalty: dict | None = None  # None means auto
    sigma: float = 1.0
    exact: str = "planewave"
    mesh_file: str | None = None
    domain: DomainSpec = field(default_factory=DomainSpec)
    out: str | None = None
    fmt: str = "csv"
    seed: int = 0
    quad_bump: int = 0
    samples: int = 50
    timing: bool = False
    estimate_c0: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        for name in ("ks", "ps", "nxs"):
            if not getattr(self, name):
                raise UsageError(f"{name} must be nonempty")
        if any(k <= 0 for k in self.ks):
            raise UsageError("wave numbers must be positive")
        if self.q is not None and any(self.q > p for p in self.ps):
            raise UsageError(f"q = {self.q} exceeds some p in {self.ps}")

    def resolve_q(self, p):
        return p if self.q is None else self.q


# parsing ---------------------------------------------------------------------

def _list(text, conv):
    try:
        return [conv(t) for t in text.split(",") if t.strip()]
    except ValueError as err:
        raise UsageError(f"bad list {text!r}: {err}") from None


def parse_rule(text):
    if text is None:
        return None
    name, _, vals = text.partition("=")
    name = name.strip().lower()
    if name not in ("kh", "k3h2p") or not vals:
        raise UsageError("rule must be kh=C or k3h2p=C (C may be a comma list)")
    consts = _list(vals, float)
    if any(c <= 0 for c in consts):
        raise UsageError("rule constants must be positive")
    return name, consts


def parse_penalty(text):
    if text is None or text == "auto":
        return None
    out = {}
    for item in text.split(","):
        key, _, val = item.partition("=")
        key = key.strip().lower()
        if key not in ("b1",) and not (key.startswith("g") and key[1:].isdigit()):
            raise UsageError(f"unknown penalty key {key!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise UsageError(f"bad penalty value in {item!r}") from None
    if "g0" not in out:
        raise UsageError("explicit penalty needs at least g0")
    return out


def parse_domain(outer, hole):
    o = _list(outer, float) if outer else [0.0, 0.0, 1.0, 1.0]
    h = _list(hole, float) if hole else None
    if len(o) != 4 or (h is not None and len(h) != 4):
        raise UsageError("rectangles are given as x0,y0,x1,y1")
    return DomainSpec(outer=((o[0], o[1]), (o[2], o[3])), hole=None if h is None else ((h[0], h[1]), (h[2], h[3])))


def build_parser():
    ap = argparse.ArgumentParser(prog="hpdg", description="hp interior-penalty DG Helmholtz solver")
    ap.add_argument("mode_pos", nargs="?", choices=MODES, metavar="MODE", help="solve | verify | converge | ksweep")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--k", default="5", help="wave number(s), comma separated")
    ap.add_argument("--p", default="1", help="polynomial degree(s)")
    ap.add_argument("--q", default="p", help="penalty ladder depth: 'p' or an integer")
    ap.add_argument("--nx", default="8", help="cells per side, comma separated")
    ap.add_argument("--rule", help="mesh from kh=C or k3h2p=C instead of --nx")
    ap.add_argument("--penalty", default="auto", help="auto or g0=..,g1=..,b1=..")
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--exact", default="planewave", help="planewave[:angle] | polyquartic | holequartic | expr:... | file:...")
    ap.add_argument("--mesh-file")
    ap.add_argument("--outer", help="outer rectangle x0,y0,x1,y1 (default unit square)")
    ap.add_argument("--hole", help="sound-soft rectangle x0,y0,x1,y1")
    ap.add_argument("--out", help="report path (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quad-bump", type=int, default=0, help="raise quadrature exactness by N")
    ap.add_argument("--samples", type=int, default=50, help="random functions per verify case")
    ap.add_argument("--timing", action="store_true", help="fill the seconds column (breaks byte reproducibility)")
    ap.add_argument("--estimate-c0", action="store_true", help="ksweep: estimate the mesh-condition constant")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def spec_from_args(args):
    mode = args.mode or args.mode_pos or "solve"
    if args.mode and args.mode_pos and args.mode != args.mode_pos:
        raise UsageError("conflicting modes")
    if args.q == "p":
        q = None
    else:
        try:
            q = int(args.q)
        except ValueError:
            raise UsageError("--q must be 'p' or an integer") from None
    return StudySpec(
        mode=mode,
        ks=_list(args.k, float),
        ps=_list(args.p, int),
        q=q,
        nxs=_list(args.nx, int),
        rule=parse_rule(args.rule),
        penalty=parse_penalty(args.penalty),
        sigma=args.sigma,
        exact=args.exact,
        mesh_file=args.mesh_file,
        domain=parse_domain(args.outer, args.hole),
        out=args.out,
        fmt=args.format,
        seed=args.seed,
        quad_bump=args.quad_bump,
        samples=args.samples,
        timing=args.timing,
        estimate_c0=args.estimate_c0,
    )


# study pieces ----------------------------------------------------------------

def mesh_size_from_rule(rule, c, k, p):
    if rule == "kh":
        return c / k
    return math.sqrt(c * p / k**3)


def nx_for_h(domain, h):
    """Smallest ``nx`` whose structured mesh has ``max h_e <= h``."""
    x0, y0, x1, y1 = domain.outer_box
    return max(1, math.ceil(math.hypot(x1 - x0, y1 - y0) / h - 1e-9))


def penalty_for(spec, mesh, p):
    q = spec.resolve_q(p)
    if spec.penalty is None:
        return auto_penalty(mesh.h, p, q, sigma=spec.sigma)
    missing = [f"g{j}" for j in range(q + 1) if f"g{j}" not in spec.penalty]
    if missing:
        raise ConfigError(f"explicit penalty for q = {q} lacks {', '.join(missing)}")
    gammas = tuple(spec.penalty[f"g{j}"] for j in range(q + 1))
    return PenaltyConfig(q=q, gammas=gammas, beta1=spec.penalty.get("b1", 0.0), sigma=spec.sigma)


def exact_for(spec, k):
    if spec.exact == "holequartic":
        if spec.domain.hole is None:
            raise UsageError("holequartic needs --hole")
        return box_bubble(spec.domain.hole_box)
    return parse_exact(spec.exact, k)


def mesh_for(spec, nx):
    if spec.mesh_file:
        return read_mesh(spec.mesh_file, domain=spec.domain)
    return build_structured_mesh(spec.domain, nx)


def solve_case(spec, k, p, mesh):
    """Assemble, solve and measure one configuration."""
    t0 = time.perf_counter()
    cfg = penalty_for(spec, mesh, p)
    u = exact_for(spec, k)
    problem = HelmholtzProblem.from_exact(u, k, spec.domain)
    space = Space(mesh, p, 2 * p + 2 + spec.quad_bump)
    uh, report = solve(assemble_system(problem, space, cfg))
    err = analysis.error_vs_exact(uh, u, space, cfg, exactness=2 * p + 4 + spec.quad_bump)
    stab = analysis.stability_report(uh, problem, space, cfg)
    return {
        "k": k,
        "p": p,
        "q": cfg.q,
        "h": mesh.h,
        "dofs": space.n_dofs,
        "err_l2": err.l2,
        "err_1hq": err.norm_1hq,
        "csta_ratio": stab.ratio,
        "residual": report.residual,
        "seconds": time.perf_counter() - t0,
        "stability": stab.as_dict(),
    }


def eoc(e_coarse, e_fine, h_coarse, h_fine):
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    if math.isclose(h_coarse, 2.0 * h_fine, rel_tol=1e-12):
        return math.log2(e_coarse / e_fine)
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def _meshes(spec):
    return [None] if spec.mesh_file else spec.nxs


def run_convergence(spec, with_eoc=True):
    rows = []
    for k in spec.ks:
        for p in spec.ps:
            prev = None
            for nx in _meshes(spec):
                mesh = mesh_for(spec, nx)
                row = solve_case(spec, k, p, mesh)
                log.info("k=%g p=%d h=%.4g err_l2=%.3e", k, p, row["h"], row["err_l2"])
                if with_eoc and prev is not None:
                    row["eoc_l2"] = eoc(prev["err_l2"], row["err_l2"], prev["h"], row["h"])
                    row["eoc_1hq"] = eoc(prev["err_1hq"], row["err_1hq"], prev["h"], row["h"])
                else:
                    row["eoc_l2"] = row["eoc_1hq"] = None
                rows.append(row)
                prev = row
    return rows


def run_ksweep(spec):
    if spec.rule is None:
        raise UsageError("ksweep needs --rule")
    if spec.mesh_file:
        raise UsageError("ksweep builds its own meshes; drop --mesh-file")
    name, consts = spec.rule
    rows = []
    for c in consts:
        for p in spec.ps:
            for k in spec.ks:
                h = mesh_size_from_rule(name, c, k, p)
                mesh = build_structured_mesh(spec.domain, nx_for_h(spec.domain, h))
                row = solve_case(spec, k, p, mesh)
                st = row["stability"]
                row.update(rule=f"{name}={c:g}", rule_c=c, data_norm=st["data_norm"], norm_1hq=st["norm_1hq"],
                           ratio_1hq=st["ratio_1hq"], ratio_l2=st["ratio_l2"])
                log.info("rule %s=%g k=%g p=%d ratio_1hq=%.4f", name, c, k, p, row["ratio_1hq"])
                rows.append(row)
    return rows


def estimate_C0(spec, rows=None):
    """Largest tested mesh-condition constant whose stability ratio (worst
    over ``k``) stays within twice the value at the smallest constant.

    Returns ``{p: C0}``; needs at least three condition values.
    """
    if spec.rule is None or len(spec.rule[1]) < 3:
        raise UsageError("estimating C0 needs >= 3 mesh-condition values in --rule")
    rows = run_ksweep(spec) if rows is None else rows
    out = {}
    for p in spec.ps:
        consts = sorted(spec.rule[1])
        worst = {c: max(r["ratio_1hq"] for r in rows if r["p"] == p and r["rule_c"] == c) for c in consts}
        plateau = worst[consts[0]]
        best = consts[0]
        for c in consts[1:]:
            if worst[c] > 2.0 * plateau:
                break
            best = c
        out[p] = best
    return out


def run_verify(spec):
    """Exact-identity suite on random discrete functions; rows carry pass flags."""
    rng = np.random.default_rng(spec.seed)
    rows = []

    def record(check, p, q, nx, value, tol, passed=None):
        ok = bool(value <= tol) if passed is None else bool(passed)
        rows.append({"check": check, "p": p, "q": q, "nx": nx, "value": float(value), "tol": tol, "passed": ok})

    k = spec.ks[0]
    for p in spec.ps:
        for nx in _meshes(spec):
            mesh = mesh_for(spec, nx)
            label = nx if nx is not None else "file"
            space = Space(mesh, p, 2 * p + 2 + spec.quad_bump)
            cfg = penalty_for(spec, mesh, p)
            q = cfg.q
            terms = assemble_terms(space, cfg)
            A = combine(terms, cfg)
            worst = {"eid1": 0.0, "eid2": 0.0, "eid3": 0.0, "re_split": 0.0, "im_split": 0.0}
            im_min = np.inf
            for _ in range(spec.samples):
                v = analysis.random_dg_function(space, rng)
                r = analysis.rellich_check(v, space, spec.domain)
                for key in ("eid1", "eid2", "eid3"):
                    worst[key] = max(worst[key], r[key])
                re, im, im_val = analysis.form_split_residuals(v, space, cfg, A)
                worst["re_split"] = max(worst["re_split"], re)
                worst["im_split"] = max(worst["im_split"], im)
                im_min = min(im_min, im_val)
            for key in ("eid1", "eid2", "eid3"):
                record(f"rellich_{key}", p, q, label, worst[key], 1e-10)
            record("split_re", p, q, label, worst["re_split"], 1e-11)
            record("split_im", p, q, label, worst["im_split"], 1e-11)
            record("im_nonnegative", p, q, label, max(0.0, -im_min), 1e-12)
            if cfg.sigma == 1.0:
                asym = abs(A - A.T).max() / abs(A).max()
                record("complex_symmetry", p, q, label, asym, 1e-12)
            if q >= 1:
                lower = cfg.truncated(q - 1)
                diff = A - combine(assemble_terms(space, lower), lower) - 1j * terms[f"J{q}"]
                # the difference cancels at the magnitude of A, so rounding scales with it
                record("q_nesting", p, q, label, abs(diff).max() / abs(A).max() if diff.nnz else 0.0, 1e-14)
            u = exact_for(spec, k)
            if spec.domain.hole is None or spec.exact in ("holequartic",):
                problem = HelmholtzProblem.from_exact(u, k, spec.domain)
                record("consistency", p, q, label, analysis.consistency_residual(u, problem, space, cfg), 1e-8)
            proj = assemble_projection_system(u, space, cfg, k, terms)
            wh, _ = solve(proj)
            record("galerkin_orthogonality", p, q, label,
                   analysis.galerkin_orthogonality_residual(u, wh, space, cfg, k), 1e-10)
    return rows


# output ----------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render(rows, header, fmt, timing):
    rows = [dict(r) for r in rows]
    if not timing:
        for r in rows:
            if "seconds" in r:
                r["seconds"] = None
    if fmt == "json":
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (np.floating, float)):
                return None if not math.isfinite(v) else float(v)
            if isinstance(v, np.integer):
                return int(v)
            return v
        return json.dumps([clean(r) for r in rows], indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(col)) for col in header])
    return buf.getvalue()


def run(spec):
    """Execute a study; returns ``(exit_code, rows, text)`` and writes ``spec.out``."""
    extra = None
    if spec.mode == "verify":
        rows = run_verify(spec)
        header = VERIFY_HEADER
        code = 0 if all(r["passed"] for r in rows) else 1
    elif spec.mode == "ksweep":
        if spec.estimate_c0 and (spec.rule is None or len(spec.rule[1]) < 3):
            raise UsageError("estimating C0 needs >= 3 mesh-condition values in --rule")
        rows = run_ksweep(spec)
        header = KSWEEP_HEADER
        code = 0
        if spec.estimate_c0:
            extra = estimate_C0(spec, rows)
    else:
        if spec.rule is not None:
            raise UsageError(f"{spec.mode} uses --nx; --rule belongs to ksweep")
        rows = run_convergence(spec, with_eoc=spec.mode == "converge")
        header = CONVERGENCE_HEADER
        code = 0
    text = render(rows, header, spec.fmt, spec.timing)
    if extra is not None:
        note = "".join(f"# C0 estimate p={p}: {c!r}\n" for p, c in extra.items())
        text = text + note if spec.fmt == "csv" else json.dumps(
            {"rows": json.loads(text), "C0": {str(p): c for p, c in extra.items()}}, indent=2, sort_keys=True) + "\n"
    if spec.out:
        with open(spec.out, "w") as fh:
            fh.write(text)
    return code, rows, text


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = spec_from_args(args)
        code, _, text = run(spec)
    except UsageError as err:
        parser.error(str(err))
    except (ConfigError, MeshError, SolverError) as err:
        print(f"hpdg: error: {err}", file=sys.stderr)
        return 2
    if not spec.out:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
