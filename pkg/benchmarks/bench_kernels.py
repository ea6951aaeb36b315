"""Compare the compiled and pure-Python kernel backends.

Times the batched weighted products directly and a full assembly of the
sesquilinear form, and checks both backends agree.

    python3 benchmarks/bench_kernels.py --nx 32 --p 3 --repeat 5
"""

import argparse
import time

import numpy as np

from hpdg import kernels
from hpdg.assembly import assemble_terms, auto_penalty
from hpdg.mesh import DomainSpec, build_structured_mesh
from hpdg.space import Space


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(nx, p, repeat, seed=0):
    rng = np.random.default_rng(seed)
    ne, nq, m = 2 * nx * nx, (p + 2) ** 2, (p + 1) * (p + 2) // 2
    w = rng.random((ne, nq))
    a = rng.standard_normal((ne, nq, m))
    b = rng.standard_normal((ne, nq, m))

    mesh = build_structured_mesh(DomainSpec(), nx)
    space = Space(mesh, p)
    cfg = auto_penalty(mesh.h, p, p)

    results = {}
    for name in ("python", "cython"):
        try:
            prev = kernels.use_backend(name)
        except ImportError:
            print(f"{name}: not available (extension not built)")
            continue
        try:
            t_prod, prod = best_of(lambda: kernels.weighted_products(w, a, b), repeat)
            t_gram, _ = best_of(lambda: kernels.weighted_products(w, a, a), repeat)
            t_asm, terms = best_of(lambda: assemble_terms(space, cfg), repeat)
        finally:
            kernels.use_backend(prev)
        results[name] = (t_prod, t_gram, t_asm, prod, terms)

    print(f"nx={nx} p={p} elements={ne} dofs={space.n_dofs} repeat={repeat}")
    print(f"{'backend':<8} {'products':>10} {'gram':>10} {'assembly':>10}")
    for name, (tp, tg, ta, _, _) in results.items():
        print(f"{name:<8} {tp:10.4f} {tg:10.4f} {ta:10.4f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speedup  {py[0] / cy[0]:10.2f} {py[1] / cy[1]:10.2f} {py[2] / cy[2]:10.2f}")
        diff = np.abs(py[3] - cy[3]).max() / np.abs(py[3]).max()
        tdiff = max(abs(py[4][n] - cy[4][n]).max() / max(abs(py[4][n]).max(), 1e-300) for n in py[4])
        print(f"max relative difference: products {diff:.1e}, assembled terms {tdiff:.1e}")
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=32)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    bench(args.nx, args.p, args.repeat)


if __name__ == "__main__":
    main()
