"""First-passage metric with conductance-derived passage times.

Each edge takes time t(e) = conductance(e)**-0.5, which lies in (0, 1]
because conductances are at least 1. The induced metric is therefore never
larger than the hop-count metric, and high-conductance edges are fast: the
first-passage geometry sees the walk's preferred routes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .environment import FiniteGraph
from .errors import UnreachableError

__all__ = [
    "passage_weight", "passage_times", "fpp_distances", "fpp_distance",
    "ball_fpp", "passage_ratio_scan", "PassageRatioScan",
]


def passage_weight(conductance: float) -> float:
    """Passage time of one edge; in (0, 1] since conductance >= 1."""
    if conductance < 1.0:
        raise ValueError(f"conductance {conductance} < 1")
    return conductance ** -0.5


def passage_times(graph: FiniteGraph) -> np.ndarray:
    return np.array([passage_weight(e.conductance) for e in graph.edges])


def fpp_distances(graph: FiniteGraph, source: int) -> tuple[np.ndarray, np.ndarray]:
    """Dijkstra first-passage times from a vertex index.

    Returns (times, predecessor): unreachable vertices get time inf and
    predecessor -1. Ties between equal-time relaxations are broken by the
    lexicographic order of the predecessor's coordinates, so reported
    geodesics are reproducible across runs and backends.
    """
    n = graph.n_vertices
    w = passage_times(graph)
    times = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    keys = [tuple(v) for v in graph.vertices.tolist()]
    times[source] = 0.0
    heap = [(0.0, keys[source], source)]
    done = np.zeros(n, dtype=bool)
    indptr, indices, eids = graph.adj_indptr, graph.adj_indices, graph.adj_edge
    while heap:
        t, _, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for ptr in range(indptr[v], indptr[v + 1]):
            u = indices[ptr]
            if done[u]:
                continue
            cand = t + w[eids[ptr]]
            better = cand < times[u] or (
                cand == times[u] and pred[u] >= 0 and keys[v] < keys[pred[u]])
            if better:
                times[u] = cand
                pred[u] = v
                heapq.heappush(heap, (cand, keys[u], u))
    return times, pred


def fpp_distance(graph: FiniteGraph, x, y) -> float:
    """First-passage time between two lattice points (raises if unreachable)."""
    i = graph.index[tuple(int(c) for c in x)]
    j = graph.index[tuple(int(c) for c in y)]
    t = fpp_distances(graph, i)[0][j]
    if math.isinf(t):
        raise UnreachableError(f"{tuple(y)} not reachable from {tuple(x)}")
    return float(t)


def ball_fpp(graph: FiniteGraph, x, r: float) -> set[tuple[int, ...]]:
    """Vertices whose first-passage time from x is at most r."""
    i = graph.index[tuple(int(c) for c in x)]
    t = fpp_distances(graph, i)[0]
    hit = np.flatnonzero(t <= r)
    return {tuple(v) for v in graph.vertices[hit].tolist()}


@dataclass
class PassageRatioScan:
    """Violation counts for 'fpp ball of radius ratio*n escapes the n-hop ball'.

    For each tested ratio and hop radius n: a sample is a violation when some
    vertex has first-passage time <= ratio*n but hop distance > n. Samples
    whose fpp ball touches the working box boundary are censored (excluded),
    so truncation of the hop metric cannot fabricate violations.
    """

    ratios: np.ndarray
    n_values: np.ndarray
    violations: np.ndarray      # (len(ratios), len(n_values)) counts
    samples: np.ndarray         # same shape, usable (non-censored) counts
    censored: np.ndarray

    def frequency(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.violations / self.samples

    def largest_clean_ratio(self, n_index: int = -1) -> float:
        """Largest tested ratio with zero violations at one n.

        A cell with no usable samples is no evidence of cleanliness, so it
        does not qualify.
        """
        ok = (self.violations[:, n_index] == 0) & (self.samples[:, n_index] > 0)
        return float(self.ratios[ok].max()) if ok.any() else math.nan


def passage_ratio_scan(graphs, center, ratios, n_values,
                       boundary_margin: int = 1) -> PassageRatioScan:
    """Scan violation frequencies over an iterable of working-box graphs.

    Each graph should be a box around `center` sized generously relative to
    max(n_values); the fpp ball is censored when it reaches within
    boundary_margin of the box edge.
    """
    ratios = np.asarray(sorted(ratios), dtype=float)
    n_values = np.asarray(sorted(n_values), dtype=int)
    viol = np.zeros((len(ratios), len(n_values)), dtype=np.int64)
    samp = np.zeros_like(viol)
    cens = np.zeros_like(viol)
    center = tuple(int(c) for c in center)
    for g in graphs:
        src = g.index[center]
        ftimes, _ = fpp_distances(g, src)
        hops = None
        inf_dist = np.abs(g.vertices - np.array(center, dtype=np.int64)).max(axis=1)
        for ri, ratio in enumerate(ratios):
            for ni, n in enumerate(n_values):
                ball = ftimes <= ratio * n
                if inf_dist[ball].max(initial=0) >= g.radius - boundary_margin:
                    cens[ri, ni] += 1
                    continue
                if hops is None:
                    from .metrics import hop_distances
                    hops = hop_distances(g, src).astype(np.float64)
                    hops[hops < 0] = np.inf
                samp[ri, ni] += 1
                if bool((hops[ball] > n).any()):
                    viol[ri, ni] += 1
    return PassageRatioScan(ratios=ratios, n_values=n_values,
                            violations=viol, samples=samp, censored=cens)
