"""Compiled backend must twin the pure-Python reference bitwise.

Everything here compares raw bytes, not values within tolerance: the two
backends share one sampling format, and a single-ulp drift would silently
fork every downstream result.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from rcmlab import _kernels
from rcmlab._kernels import python_backend as pk
from rcmlab.errors import ResourceLimitError, ScanLimitError

ck = _kernels.compiled_backend
pytestmark = pytest.mark.skipif(ck is None, reason="extension not built")

T_GRID = np.array([0.5, 1.0, 3.0, 7.0])

LAWS = [
    (0, (1.0,)),
    (0, (2.5,)),
    (1, (3.0,)),
    (1, (0.8,)),
    (2, (1.7,)),
    (3, (1.0, 50.0, 0.5)),
]


def bits(x) -> bytes:
    return np.asarray(x, dtype=np.float64).tobytes()


def test_scalar_hash_twins():
    keys = [0, 1, 2**63, 2**64 - 1, 0xDEADBEEF, 2**64 + 5, -1]
    for z in keys:
        assert pk.mix64(z) == ck.mix64(z)
    for seed in keys:
        for words in ((), (5,), (0xC9, 7), (-3, 2**62)):
            assert pk.hash_words(seed, words) == ck.hash_words(seed, words)
    for z in keys:
        h = pk.mix64(z)
        assert bits(pk.u01(h)) == bits(ck.u01(h))


def test_site_open_twin():
    for seed in range(30):
        for coords in ((0, 0), (-5, 3), (17, -2, 9), (2**40, -2**40)):
            for p in (0.05, 0.5, 0.95):
                assert pk.site_open(seed, p, coords) == \
                    ck.site_open(seed, p, coords)


def test_conductance_scalar_twin_all_laws():
    for kind, params in LAWS:
        for seed in range(20):
            for base in ((-4, 1), (0, 0), (9, -9), (123, 456)):
                for axis in (0, 1):
                    a = pk.conductance_scalar(seed, kind, params, base, axis)
                    b = ck.conductance_scalar(seed, kind, params, base, axis)
                    assert bits(a) == bits(b)


@pytest.mark.parametrize("csrw", [False, True])
@pytest.mark.parametrize("fresh", [False, True])
def test_walk_ensemble_twin(csrw, fresh):
    args = (2, 11, 0.7, 1, (3.0,), 92, 5, csrw, T_GRID, 30, (0, 0), 10**6,
            fresh)
    pa, ca, ea = pk.walk_ensemble(*args)
    pb, cb, eb = ck.walk_ensemble(*args)
    assert (pa == pb).all()
    assert ca.tobytes() == cb.tobytes()
    assert (ea == eb).all()


@pytest.mark.parametrize("dim,p,law,x0", [
    (1, 0.5, (2, (1.5,)), (0,)),
    (2, 1.0, (0, (1.0,)), (3, -2)),
    (3, 0.9, (3, (1.0, 50.0, 0.5)), (0, 0, 0)),
])
def test_walk_ensemble_twin_dims_and_laws(dim, p, law, x0):
    args = (dim, 3, p, law[0], law[1], 128, 9, False, T_GRID, 20, x0, 10**6)
    pa, ca, ea = pk.walk_ensemble(*args)
    pb, cb, eb = ck.walk_ensemble(*args)
    assert (pa == pb).all()
    assert ca.tobytes() == cb.tobytes()
    assert (ea == eb).all()


def test_walk_path_twin():
    for wi in range(8):
        for csrw in (False, True):
            args = (2, 11, 0.7, 1, (3.0,), 92, 5, wi, csrw, 25.0, (1, -2),
                    10**6)
            ta, xa, ra = pk.walk_path(*args)
            tb, xb, rb = ck.walk_path(*args)
            assert ta.tobytes() == tb.tobytes()
            assert (xa == xb).all()
            assert ra.tobytes() == rb.tobytes()


def test_error_twins():
    def outcome(fn, *args):
        try:
            fn(*args)
            return None
        except (ScanLimitError, ResourceLimitError) as exc:
            return type(exc).__name__, str(exc)

    scan = (2, 11, 0.05, 0, (1.0,), 3, 5, False, T_GRID, 5, (0, 0), 10**6)
    assert outcome(pk.walk_ensemble, *scan) == outcome(ck.walk_ensemble, *scan)
    assert outcome(pk.walk_ensemble, *scan)[0] == "ScanLimitError"

    cap = (2, 11, 1.0, 0, (1.0,), 4, 5, False, T_GRID, 5, (0, 0), 7)
    assert outcome(pk.walk_ensemble, *cap) == outcome(ck.walk_ensemble, *cap)
    assert outcome(pk.walk_ensemble, *cap)[0] == "ResourceLimitError"

    path_cap = (2, 11, 1.0, 0, (1.0,), 4, 5, 0, False, 50.0, (0, 0), 7)
    assert outcome(pk.walk_path, *path_cap) == outcome(ck.walk_path, *path_cap)


def test_brandes_twin_on_real_graphs():
    from rcmlab.environment import ConductanceLaw, Environment, periodize, \
        restrict_to_box

    for seed in (2, 4, 9):
        env = Environment(dim=2, p=0.7, seed=seed,
                          law=ConductanceLaw.pareto(3.0))
        for g in (restrict_to_box(env, (0, 0), 5), periodize(env, 4)):
            a = pk.brandes_edge_flow(g.adj_indptr, g.adj_indices,
                                     g.adj_edge, g.n_edges)
            b = ck.brandes_edge_flow(g.adj_indptr, g.adj_indices,
                                     g.adj_edge, g.n_edges)
            assert a.tobytes() == b.tobytes()


def test_force_backend_env_var():
    code = ("import rcmlab._kernels as k; "
            "print(k.BACKEND, k.walk_ensemble.__module__)")
    for forced, expect in (("python", "python"), ("compiled", "compiled")):
        env = dict(os.environ, RCMLAB_FORCE_BACKEND=forced)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        backend, module = out.stdout.split()
        assert backend == expect
        assert module.endswith("_pykern" if forced == "python" else "_ckern")


def test_backend_constant_reflects_loaded_module():
    assert _kernels.BACKEND == "compiled"
    assert _kernels.walk_ensemble is ck.walk_ensemble
