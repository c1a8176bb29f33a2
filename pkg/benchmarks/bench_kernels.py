"""Compare the compiled and pure-Python kernel backends.

Runs the twinned hot kernels on identical inputs, times both backends, and
checks the outputs agree bitwise (the backends' core contract). Run as

    python3 benchmarks/bench_kernels.py [--walks N] [--repeat K]
"""

import argparse
import time

import numpy as np

from rcmlab._kernels import compiled_backend, python_backend
from rcmlab.environment import ConductanceLaw, Environment, periodize


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _report(name, py_s, c_s):
    print(f"{name:<28} python {py_s * 1e3:9.2f} ms   "
          f"compiled {c_s * 1e3:9.2f} ms   speedup x{py_s / c_s:6.1f}")


def bench_walk_ensemble(pk, ck, n_walks, repeat):
    t_grid = np.array([5.0, 10.0, 25.0, 50.0])
    for label, p, law, csrw in (
        ("walk_ensemble lattice", 1.0, (0, (1.0,)), False),
        ("walk_ensemble disordered", 0.7, (1, (3.0,)), False),
        ("walk_ensemble csrw heavy", 0.7, (1, (0.8,)), True),
    ):
        args = (2, 1, p, law[0], law[1], 92, 7, csrw, t_grid,
                n_walks, (0, 0), 10**7)
        c_s, c_out = _best_of(lambda: ck.walk_ensemble(*args), repeat)
        py_s, py_out = _best_of(lambda: pk.walk_ensemble(*args), 1)
        assert (py_out[0] == c_out[0]).all()
        assert py_out[1].tobytes() == c_out[1].tobytes()
        _report(f"{label} ({n_walks})", py_s, c_s)


def bench_walk_path(pk, ck, repeat):
    args = (2, 1, 0.7, 1, (3.0,), 92, 7, 0, False, 2000.0, (0, 0), 10**7)
    c_s, c_out = _best_of(lambda: ck.walk_path(*args), repeat)
    py_s, py_out = _best_of(lambda: pk.walk_path(*args), 1)
    assert py_out[0].tobytes() == c_out[0].tobytes()
    assert (py_out[1] == c_out[1]).all()
    _report(f"walk_path (t=2000, {len(c_out[0])} jumps)", py_s, c_s)


def bench_brandes(pk, ck, repeat):
    env = Environment(dim=2, p=0.7, seed=3, law=ConductanceLaw.pareto(3.0))
    g = periodize(env, 9)
    args = (g.adj_indptr, g.adj_indices, g.adj_edge, g.n_edges)
    c_s, c_out = _best_of(lambda: ck.brandes_edge_flow(*args), repeat)
    py_s, py_out = _best_of(lambda: pk.brandes_edge_flow(*args), 1)
    assert py_out.tobytes() == c_out.tobytes()
    _report(f"brandes_edge_flow (n={g.n_vertices})", py_s, c_s)


def bench_scalar_hash(pk, ck, repeat):
    def run(mod):
        acc = 0
        for i in range(20000):
            acc ^= mod.hash_words(i, (0xC9, i))
        return acc

    c_s, c_out = _best_of(lambda: run(ck), repeat)
    py_s, py_out = _best_of(lambda: run(pk), 1)
    assert py_out == c_out
    _report("hash_words x20000", py_s, c_s)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--walks", type=int, default=200,
                    help="ensemble size per walk benchmark (default 200)")
    ap.add_argument("--repeat", type=int, default=3,
                    help="best-of repeats for the compiled side (default 3)")
    args = ap.parse_args()

    if compiled_backend is None:
        raise SystemExit("compiled backend not built; nothing to compare "
                         "(pip install -e . rebuilds it)")
    print("backends: python=_pykern, compiled=_ckern; outputs checked bitwise\n")
    bench_scalar_hash(python_backend, compiled_backend, args.repeat)
    bench_walk_ensemble(python_backend, compiled_backend, args.walks, args.repeat)
    bench_walk_path(python_backend, compiled_backend, args.repeat)
    bench_brandes(python_backend, compiled_backend, args.repeat)


if __name__ == "__main__":
    main()
