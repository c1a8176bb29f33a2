"""First-passage metric: Dijkstra against networkx, comparison invariants."""

import dataclasses
import math

import networkx as nx
import numpy as np
import pytest

from rcmlab.environment import (
    ConductanceLaw,
    Environment,
    FiniteGraph,
    periodize,
    restrict_to_box,
)
from rcmlab.errors import UnreachableError
from rcmlab.fpp import (
    ball_fpp,
    fpp_distance,
    fpp_distances,
    passage_ratio_scan,
    passage_weight,
    passage_times,
    PassageRatioScan,
)
from rcmlab.metrics import ball_graph, hop_distances


def to_weighted_networkx(graph):
    g = nx.MultiGraph()
    g.add_nodes_from(range(graph.n_vertices))
    for e in range(graph.n_edges):
        g.add_edge(int(graph.edge_u[e]), int(graph.edge_v[e]),
                   weight=passage_weight(graph.edges[e].conductance))
    return g


def with_conductance(graph, edge_index, value):
    """Copy of the graph with one edge's conductance replaced."""
    edges = list(graph.edges)
    edges[edge_index] = dataclasses.replace(edges[edge_index],
                                            conductance=value)
    return FiniteGraph(env=graph.env, center=graph.center,
                       radius=graph.radius, periodic=graph.periodic,
                       vertices=graph.vertices, edges=edges,
                       edge_u=graph.edge_u, edge_v=graph.edge_v,
                       edge_disp=graph.edge_disp)


def test_passage_weight_values():
    assert passage_weight(1.0) == 1.0
    assert passage_weight(4.0) == 0.5
    assert passage_weight(100.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        passage_weight(0.5)


@pytest.mark.parametrize("seed", range(10))
def test_fpp_matches_networkx_dijkstra(seed):
    env = Environment(dim=2, p=0.65, seed=seed, law=ConductanceLaw.pareto(3.0))
    g = restrict_to_box(env, (0, 0), 4)
    if g.n_vertices < 2:
        pytest.skip("degenerate window")
    ref = to_weighted_networkx(g)
    src = 0
    theirs = nx.single_source_dijkstra_path_length(ref, src)
    mine, _ = fpp_distances(g, src)
    for v in range(g.n_vertices):
        if v in theirs:
            assert mine[v] == pytest.approx(theirs[v], abs=1e-12)
        else:
            assert math.isinf(mine[v])


def test_fpp_on_torus_with_parallel_edges(disordered_env):
    g = periodize(disordered_env, 4)
    ref = to_weighted_networkx(g)
    theirs = nx.single_source_dijkstra_path_length(ref, 0)
    mine, _ = fpp_distances(g, 0)
    for v in range(g.n_vertices):
        assert mine[v] == pytest.approx(theirs[v], abs=1e-12)


def test_unit_conductance_fpp_equals_hops(lattice_env):
    g = restrict_to_box(lattice_env, (0, 0), 5)
    src = g.index[(0, 0)]
    times, _ = fpp_distances(g, src)
    hops = hop_distances(g, src)
    np.testing.assert_allclose(times, hops.astype(float))
    assert ball_fpp(g, (0, 0), 3.0) == ball_graph(g, (0, 0), 3)


def test_fpp_never_exceeds_hops():
    # Passage weights are at most 1, so the fpp metric is dominated by the
    # chemical distance, instance by instance.
    checked = 0
    for seed in range(40):
        env = Environment(dim=2, p=0.6, seed=seed,
                          law=ConductanceLaw.pareto(2.0))
        g = restrict_to_box(env, (0, 0), 4)
        if g.n_vertices < 2:
            continue
        times, _ = fpp_distances(g, 0)
        hops = hop_distances(g, 0)
        reach = hops >= 0
        assert (times[reach] <= hops[reach] + 1e-12).all()
        assert np.isinf(times[~reach]).all()
        checked += 1
    assert checked >= 30


def test_increasing_a_conductance_never_increases_fpp():
    rng = np.random.default_rng(5)
    done = 0
    for seed in range(30):
        env = Environment(dim=2, p=0.7, seed=seed,
                          law=ConductanceLaw.pareto(3.0))
        g = restrict_to_box(env, (0, 0), 3)
        if g.n_vertices < 4 or g.n_edges == 0:
            continue
        base, _ = fpp_distances(g, 0)
        e = int(rng.integers(g.n_edges))
        bumped = with_conductance(g, e, g.edges[e].conductance * 5.0)
        after, _ = fpp_distances(bumped, 0)
        assert (after <= base + 1e-12).all()
        done += 1
    assert done >= 20


def test_fpp_distance_unreachable_raises():
    env = Environment(dim=2, p=0.2, seed=3, law=ConductanceLaw.constant(1.0))
    g = restrict_to_box(env, (0, 0), 6)
    times, _ = fpp_distances(g, 0)
    cut = np.flatnonzero(np.isinf(times))
    assert len(cut) > 0
    x = tuple(g.vertices[0].tolist())
    y = tuple(g.vertices[cut[0]].tolist())
    with pytest.raises(UnreachableError):
        fpp_distance(g, x, y)


def test_tie_break_is_reproducible(disordered_env):
    g = periodize(disordered_env, 4)
    t1, p1 = fpp_distances(g, 0)
    t2, p2 = fpp_distances(g, 0)
    assert t1.tobytes() == t2.tobytes()
    assert (p1 == p2).all()


class TestPassageRatioScan:
    def build(self, seeds, radius=10):
        graphs = []
        for s in seeds:
            env = Environment(dim=2, p=1.0, seed=s,
                              law=ConductanceLaw.constant(1.0))
            graphs.append(restrict_to_box(env, (0, 0), radius))
        return graphs

    def test_unit_law_exact_threshold(self):
        # With conductance 1 the fpp and hop metrics coincide: ratios <= 1
        # are clean, anything above violates as soon as the box allows it.
        scan = passage_ratio_scan(self.build([0]), (0, 0),
                                  ratios=(0.5, 1.0, 2.0), n_values=(1, 2, 3))
        assert scan.violations[0].tolist() == [0, 0, 0]
        assert scan.violations[1].tolist() == [0, 0, 0]
        assert (scan.violations[2] > 0).all()
        assert scan.largest_clean_ratio() == 1.0

    def test_censoring_in_small_box(self):
        # Box radius 3 cannot certify a ratio-2 ball at n = 3.
        scan = passage_ratio_scan(self.build([0], radius=3), (0, 0),
                                  ratios=(2.0,), n_values=(3,))
        assert scan.censored[0, 0] == 1
        assert scan.samples[0, 0] == 0

    def test_zero_sample_cell_is_not_clean(self):
        scan = PassageRatioScan(
            ratios=np.array([1.0, 4.0]), n_values=np.array([2]),
            violations=np.array([[0], [0]]),
            samples=np.array([[5], [0]]),
            censored=np.array([[0], [5]]))
        # the 4.0 row never produced a usable sample
        assert scan.largest_clean_ratio() == 1.0

    def test_all_censored_gives_nan(self):
        scan = PassageRatioScan(
            ratios=np.array([1.0]), n_values=np.array([2]),
            violations=np.array([[0]]), samples=np.array([[0]]),
            censored=np.array([[7]]))
        assert math.isnan(scan.largest_clean_ratio())

    def test_frequency_shape_and_range(self, disordered_env):
        graphs = []
        for s in range(4):
            env = Environment(dim=2, p=0.7, seed=s,
                              law=ConductanceLaw.pareto(3.0))
            g = restrict_to_box(env, (0, 0), 8)
            if (0, 0) in g.index:
                graphs.append(g)
        scan = passage_ratio_scan(graphs, (0, 0), ratios=(0.5, 1.0),
                                  n_values=(2, 3))
        freq = scan.frequency()
        assert freq.shape == (2, 2)
        valid = scan.samples > 0
        assert ((freq[valid] >= 0) & (freq[valid] <= 1)).all()


def test_passage_times_vector_matches_edges(disordered_env):
    g = restrict_to_box(disordered_env, (0, 0), 3)
    w = passage_times(g)
    for e, rec in enumerate(g.edges):
        assert w[e] == passage_weight(rec.conductance)
