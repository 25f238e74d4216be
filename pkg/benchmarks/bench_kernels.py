"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Also reports the end-to-end cost of one elliptic solve and one short HMC
chain with each backend.
"""
import argparse
import importlib
import os
import timeit

import numpy as np

from sinhq import _kernels_py as py
from sinhq.lattice import Grid4

try:
    from sinhq import _kernels as cy
except ImportError:
    cy = None


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for g in (Grid4(8, 0.25, 16, 0.125), Grid4(16, 0.125, 32, 0.0625)):
        f = rng.standard_normal(g.shape)
        mu = np.abs(rng.standard_normal(g.shape))
        cases = {
            "laplacian": lambda k: k.laplacian(f, g.spacings),
            "exp_pair": lambda k: k.exp_pair(f, mu, mu, 3.0, 700.0),
            "cosh_force": lambda k: k.cosh_force(f, 3.0, 0.5, 700.0),
        }
        for name, call in cases.items():
            t_py = bench(lambda: call(py), repeat)
            t_cy = bench(lambda: call(cy), repeat) if cy else float("nan")
            if cy is not None:
                a, b = call(py), call(cy)
                a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
                err = max(float(np.max(np.abs(x - y)) / np.max(np.abs(x))) for x, y in zip(a, b))
            else:
                err = float("nan")
            rows.append((g.tag, name, t_py, t_cy, t_py / t_cy, err))
    return rows


def end_to_end(backend):
    """Run a solve and a chain in a fresh import with the chosen backend."""
    os.environ["SINHQ_PURE_PYTHON"] = "1" if backend == "python" else "0"
    import sinhq.kernels
    importlib.reload(sinhq.kernels)
    from sinhq import fields, gibbs2d, solver
    for mod in (solver, gibbs2d):
        importlib.reload(mod)
    from sinhq.lattice import PhysicsParams
    g = Grid4(8, 0.25, 16, 0.125)
    ph = PhysicsParams.from_a2(0.25)
    wick = fields.wick_constant(g, 1.0)
    W = fields.sample_gff(g, 1.0, 0, 0)
    prob = solver.EllipticProblem(g, ph, fields.gmc(g, W, ph.alpha, wick).mass,
                                  fields.gmc(g, W, -ph.alpha, wick).mass)
    t_solve = bench(lambda: solver.solve(prob, 1e-9), 3)
    model = gibbs2d.CoshModel2D(g.zgrid, 1.0, ph.alpha, 4 * np.pi, base="slice", grid4=g)
    t_chain = bench(lambda: gibbs2d.sample_chain(model, 500, 0, burn_in=0), 3)
    return sinhq.kernels.BACKEND, t_solve, t_chain


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"{'grid':26s} {'kernel':11s} {'numpy ms':>9s} {'cython ms':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for tag, name, a, b, s, e in kernel_table(args.repeat):
        print(f"{tag:26s} {name:11s} {1e3 * a:9.3f} {1e3 * b:10.3f} {s:8.2f} {e:13.1e}")
    print()
    for backend in ("python", "cython"):
        if backend == "cython" and cy is None:
            continue
        got, ts, tc = end_to_end(backend)
        print(f"backend={got:7s} solve (desk, a2=0.25) {ts:.3f} s   HMC 500 traj {tc:.3f} s")


if __name__ == "__main__":
    main()
