"""Chemical distance and metric-comparison radii, checked against networkx."""

import math

import networkx as nx
import numpy as np
import pytest

from rcmlab.environment import (
    ConductanceLaw,
    Environment,
    periodize,
    restrict_to_box,
    site_open,
)
from rcmlab.metrics import (
    ComparisonStats,
    ball_graph,
    ball_linf,
    confinement_radius,
    graph_distance,
    greedy_path,
    hop_distances,
    reach_radius,
    sample_comparison,
)


def to_networkx(graph):
    g = nx.MultiGraph()
    g.add_nodes_from(range(graph.n_vertices))
    for e in range(graph.n_edges):
        g.add_edge(int(graph.edge_u[e]), int(graph.edge_v[e]))
    return g


@pytest.mark.parametrize("seed", range(12))
def test_hop_distances_match_networkx(seed):
    env = Environment(dim=2, p=0.6, seed=seed, law=ConductanceLaw.constant(1.0))
    g = restrict_to_box(env, (0, 0), 4)
    if g.n_vertices == 0:
        pytest.skip("empty window")
    ref = to_networkx(g)
    for src in range(0, g.n_vertices, max(1, g.n_vertices // 5)):
        mine = hop_distances(g, src)
        theirs = nx.single_source_shortest_path_length(ref, src)
        for v in range(g.n_vertices):
            assert mine[v] == theirs.get(v, -1)


def test_hop_distances_max_depth_truncates(lattice_env):
    g = restrict_to_box(lattice_env, (0, 0), 4)
    full = hop_distances(g, g.index[(0, 0)])
    capped = hop_distances(g, g.index[(0, 0)], max_depth=3)
    seen = capped >= 0
    assert (capped[seen] == full[seen]).all()
    assert (full[~seen] > 3).all()


def test_graph_distance_on_lattice_is_l1(lattice_env):
    g = restrict_to_box(lattice_env, (0, 0), 5)
    assert graph_distance(g, (0, 0), (3, -2)) == 5
    assert graph_distance(g, (1, 1), (1, 1)) == 0
    with pytest.raises(ValueError):
        graph_distance(g, (0, 0), (99, 99))


def test_graph_distance_none_when_disconnected():
    # Sparse window with boundary-stranded sites: three components.
    env = Environment(dim=2, p=0.2, seed=3, law=ConductanceLaw.constant(1.0))
    g = restrict_to_box(env, (0, 0), 6)
    ref = to_networkx(g)
    comps = list(nx.connected_components(ref))
    assert len(comps) >= 2
    a = next(iter(comps[0]))
    b = next(iter(comps[1]))
    x = tuple(g.vertices[a].tolist())
    y = tuple(g.vertices[b].tolist())
    assert graph_distance(g, x, y) is None


def test_ball_graph_on_lattice(lattice_env):
    g = restrict_to_box(lattice_env, (0, 0), 6)
    ball = ball_graph(g, (0, 0), 3)
    expected = {(i, j) for i in range(-3, 4) for j in range(-3, 4)
                if abs(i) + abs(j) <= 3}
    assert ball == expected


def test_ball_linf_is_the_box():
    pts = ball_linf((1, -1), 2)
    assert len(pts) == 25
    assert all(max(abs(a - 1), abs(b + 1)) <= 2 for a, b in pts)


class TestGreedyPath:
    def test_reaches_origin_on_lattice(self, lattice_env):
        rec = greedy_path(lattice_env, (5, -3))
        assert rec.points[0] == (5, -3)
        assert rec.points[-1] == (0, 0)
        assert rec.is_self_avoiding
        assert rec.edge_hops >= 8     # at least the L1 distance

    def test_size_bound(self, disordered_env):
        for x in ((7, 3), (-5, 6), (9, -9)):
            if not site_open(disordered_env, x):
                continue
            rec = greedy_path(disordered_env, x)
            assert rec.size_bound_ok

    def test_trivial_at_origin(self, lattice_env):
        rec = greedy_path(lattice_env, (0, 0))
        assert rec.points == [(0, 0)]
        assert rec.edge_hops == 0


class TestComparisonRadii:
    def test_lattice_radii_are_one(self, lattice_env):
        # On the full lattice the chemical ball at ratio 2 never escapes the
        # box and every box site is reachable within 2m hops.
        u = confinement_radius(lattice_env, (0, 0), 2.0, 8)
        v = reach_radius(lattice_env, (0, 0), 2.0, 8)
        assert u.value == 1 and not u.censored
        assert v.value == 1 and not v.censored

    def test_closed_center_rejected(self, disordered_env):
        closed = next((i, 0) for i in range(50)
                      if not site_open(disordered_env, (i, 0)))
        with pytest.raises(ValueError):
            confinement_radius(disordered_env, closed, 2.0, 4)

    def test_tables_record_monotone_thresholds(self, disordered_env):
        if not site_open(disordered_env, (0, 0)):
            pytest.skip("origin closed")
        u = confinement_radius(disordered_env, (0, 0), 2.0, 6)
        table = u.table
        assert table.shape == (6, 4)
        # max |.|_inf over the growing ball is nondecreasing in m
        assert (np.diff(table[:, 1]) >= 0).all()

    def test_censoring_at_tiny_ratio(self, disordered_env):
        if not site_open(disordered_env, (0, 0)):
            pytest.skip("origin closed")
        # ratio far below 1: the inclusion keeps failing, so the estimate
        # is censored at n_max.
        u = confinement_radius(disordered_env, (0, 0), 0.05, 5)
        assert u.censored
        assert u.value == 6


class TestSampleComparison:
    def test_deterministic_and_skips_closed(self):
        env = Environment(dim=2, p=0.6, seed=0, law=ConductanceLaw.constant(1.0))
        a = sample_comparison(env, 12, seed0=0, n_max=6)
        b = sample_comparison(env, 12, seed0=0, n_max=6)
        assert (a.confinement == b.confinement).all()
        assert (a.reach == b.reach).all()
        assert a.seeds == b.seeds
        assert a.skipped_closed_origin == b.skipped_closed_origin
        assert len(a.confinement) == 12
        # roughly 40% of seeds have a closed origin
        assert a.skipped_closed_origin > 0

    def test_tail_curve_nonincreasing(self):
        env = Environment(dim=2, p=0.55, seed=0, law=ConductanceLaw.constant(1.0))
        stats = sample_comparison(env, 40, seed0=100, box_ratio=1.5,
                                  hop_ratio=1.5, n_max=8)
        for which in ("confinement", "reach"):
            curve = stats.tail_curve(which, range(1, 9))
            assert (np.diff(curve) <= 1e-12).all()

    def test_fitted_decay_recovers_synthetic_slope(self):
        stats = ComparisonStats(
            box_ratio=2.0, hop_ratio=2.0, n_max=10,
            confinement=np.array([1]), reach=np.array([1]),
            confinement_censored=0, reach_censored=0, skipped_closed_origin=0)
        # exact exponential tail: P(u > n) = exp(-0.4 n)
        ns = np.arange(1, 9)
        stats.confinement = np.array([])   # force the synthetic path below
        curve = np.exp(-0.4 * ns)
        stats.tail_curve = lambda which, n_values: curve   # type: ignore
        intercept, slope = ComparisonStats.fitted_decay(stats, "confinement", ns)
        assert slope == pytest.approx(-0.4, abs=1e-12)
        assert intercept == pytest.approx(0.0, abs=1e-10)

    def test_fitted_decay_nan_when_tail_vanishes(self):
        stats = ComparisonStats(
            box_ratio=2.0, hop_ratio=2.0, n_max=10,
            confinement=np.ones(5, dtype=int), reach=np.ones(5, dtype=int),
            confinement_censored=0, reach_censored=0, skipped_closed_origin=0)
        intercept, slope = stats.fitted_decay("confinement", range(2, 8))
        assert math.isnan(slope) and math.isnan(intercept)


def test_torus_hops_respect_wraparound(lattice_env):
    g = periodize(lattice_env, 3)   # 7x7 torus
    d = graph_distance(g, (-3, 0), (3, 0))
    assert d == 1   # wrap edge
