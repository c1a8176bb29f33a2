"""Chemical (hop-count) metric vs the Euclidean geometry of the lattice.

The graph metric d(x, y) counts edges, never their lengths, so a single long
edge can move the walk far in one hop. The two estimators here quantify both
failure directions of the comparison d ~ |.|_inf on finite windows:

* confinement_radius: from which n on do all graph balls B_d(x, m), m >= n,
  stay inside the scaled box |y - x|_inf <= ratio * m;
* reach_radius: from which n on is every open site of the box |y - x|_inf <= m
  reachable within ratio * m hops.

Both are computed on an enlarged working box (default 20% margin beyond the
worst case the ratio allows) so truncation cannot manufacture violations of
reach_radius; paths that leave the margin and return could only hide
violations, never create them, and the margin makes that event exponentially
unlikely. Samples that still fail at n_max are reported censored, never
crashed.

greedy_path builds an explicit lattice path from x to the origin by zeroing
one coordinate at a time (projection moves), sliding along an axis toward the
origin when no projection lands on an open site. Slides that pass through the
coordinate hyperplane are "crossing" segments; their total length eta bounds
the path size: n_points <= |x|_1 + 2*eta + 1.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, FiniteGraph, restrict_to_box, site_open
from .errors import ScanLimitError

__all__ = [
    "hop_distances", "graph_distance", "ball_graph", "ball_linf",
    "greedy_path", "PathRecord", "PathSegment",
    "confinement_radius", "reach_radius", "RadiusEstimate",
    "sample_comparison", "ComparisonStats",
]


def hop_distances(graph: FiniteGraph, source: int,
                  max_depth: int | None = None) -> np.ndarray:
    """BFS hop distances from a vertex index; -1 marks unreachable."""
    n = graph.n_vertices
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    indptr, indices = graph.adj_indptr, graph.adj_indices
    while q:
        v = q.popleft()
        dv = dist[v]
        if max_depth is not None and dv >= max_depth:
            continue
        for ptr in range(indptr[v], indptr[v + 1]):
            w = indices[ptr]
            if dist[w] < 0:
                dist[w] = dv + 1
                q.append(w)
    return dist


def graph_distance(graph: FiniteGraph, x, y) -> int | None:
    """Hop distance between two lattice points; None if unreachable.

    Both points must be vertices of the graph.
    """
    x, y = tuple(int(c) for c in x), tuple(int(c) for c in y)
    try:
        i, j = graph.index[x], graph.index[y]
    except KeyError as missing:
        raise ValueError(f"{missing.args[0]} is not a vertex") from None
    d = hop_distances(graph, i)[j]
    return None if d < 0 else int(d)


def ball_graph(graph: FiniteGraph, x, n: int) -> set[tuple[int, ...]]:
    """Vertices within n hops of x."""
    i = graph.index[tuple(int(c) for c in x)]
    dist = hop_distances(graph, i, max_depth=n)
    hit = np.flatnonzero((dist >= 0) & (dist <= n))
    return {tuple(v) for v in graph.vertices[hit].tolist()}


def ball_linf(center, n: int) -> list[tuple[int, ...]]:
    """All lattice points of the box |y - center|_inf <= n."""
    ranges = [range(int(c) - n, int(c) + n + 1) for c in center]
    return list(itertools.product(*ranges))


# ---------------------------------------------------------------------------
# Greedy path to the origin

@dataclass(frozen=True)
class PathSegment:
    kind: str              # "projection" or "slide"
    axis: int
    start: tuple[int, ...]
    end: tuple[int, ...]
    crossing: bool

    @property
    def length(self) -> int:
        return abs(self.end[self.axis] - self.start[self.axis])


@dataclass
class PathRecord:
    origin: tuple[int, ...]
    points: list[tuple[int, ...]]
    segments: list[PathSegment]
    open_flags: list[bool]

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_open(self) -> int:
        return sum(self.open_flags)

    @property
    def edge_hops(self) -> int:
        """Edges of the environment graph traversed (open sites minus one)."""
        return self.n_open - 1

    @property
    def crossing_count(self) -> int:
        return sum(1 for s in self.segments if s.crossing)

    @property
    def crossing_length(self) -> int:
        return sum(s.length for s in self.segments if s.crossing)

    @property
    def l1_start(self) -> int:
        return sum(abs(c) for c in self.origin)

    def is_self_avoiding(self) -> bool:
        return len(set(self.points)) == len(self.points)

    def size_bound_ok(self) -> bool:
        return self.n_points <= self.l1_start + 2 * self.crossing_length + 1


def _projectable_axes(env: Environment, z) -> list[int]:
    """Axes j with z_j != 0 whose projection (z with z_j = 0) is open."""
    out = []
    for j in range(env.dim):
        if z[j] != 0:
            w = list(z)
            w[j] = 0
            if site_open(env, w):
                out.append(j)
    return out


def _segment_points(start, end, axis):
    step = 1 if end[axis] > start[axis] else -1
    pts = []
    cur = list(start)
    while cur[axis] != end[axis]:
        cur[axis] += step
        pts.append(tuple(cur))
    return pts


def greedy_path(env: Environment, x, slide_budget: int | None = None) -> PathRecord:
    """Deterministic lattice path from open site x to the open origin.

    Round structure: if some axis j (smallest wins) has an open projection,
    move straight to it; otherwise slide along the smallest-index nonzero
    axis toward the origin -- continuing past it if necessary -- until a site
    with an open projection (or the origin itself) appears. The slide budget
    guards against astronomically unlikely non-termination; exceeding it
    raises ScanLimitError.
    """
    x = tuple(int(c) for c in x)
    if not site_open(env, x):
        raise ValueError(f"start {x} is closed")
    if not site_open(env, (0,) * env.dim):
        raise ValueError("origin is closed in this environment")
    if slide_budget is None:
        slide_budget = int(math.ceil(64.0 / (env.p * env.p)))

    points = [x]
    segments: list[PathSegment] = []
    cur = x
    while any(c != 0 for c in cur):
        # when one nonzero axis remains, its projection is the open origin,
        # so the last round always projects and never slides
        proj = _projectable_axes(env, cur)
        if proj:
            j = proj[0]
            end = list(cur)
            end[j] = 0
            seg = PathSegment("projection", j, cur, tuple(end), False)
            points.extend(_segment_points(cur, tuple(end), j))
            segments.append(seg)
            cur = tuple(end)
            continue
        axis = next(i for i, c in enumerate(cur) if c != 0)
        direction = -1 if cur[axis] > 0 else 1
        z = list(cur)
        found = None
        for _ in range(slide_budget):
            z[axis] += direction
            zt = tuple(z)
            if all(c == 0 for c in zt):
                found = zt
                break
            if site_open(env, zt) and _projectable_axes(env, zt):
                found = zt
                break
        if found is None:
            raise ScanLimitError(
                f"slide from {cur} along axis {axis} found no projectable "
                f"open site within {slide_budget} steps")
        crossing = cur[axis] * found[axis] < 0
        seg = PathSegment("slide", axis, cur, found, crossing)
        points.extend(_segment_points(cur, found, axis))
        segments.append(seg)
        cur = found

    flags = [site_open(env, pt) for pt in points]
    return PathRecord(origin=x, points=points, segments=segments,
                      open_flags=flags)


# ---------------------------------------------------------------------------
# Radius estimators

@dataclass
class RadiusEstimate:
    """Smallest n from which a metric-comparison inclusion holds up to n_max.

    value is 1 when the inclusion holds for every probed m. censored means
    the inclusion still failed at n_max, so the true radius exceeds it.
    table columns: m, statistic, threshold, ok.
    """

    value: int
    censored: bool
    n_max: int
    ratio: float
    table: np.ndarray

    @classmethod
    def from_failures(cls, fails, n_max, ratio, table):
        last_fail = 0
        for m, bad in fails:
            if bad:
                last_fail = m
        return cls(value=max(1, last_fail + 1), censored=bool(last_fail == n_max),
                   n_max=n_max, ratio=ratio, table=table)


def _working_graph(env: Environment, x, working_radius: int) -> FiniteGraph:
    return restrict_to_box(env, x, working_radius)


def confinement_radius(env: Environment, x, ratio: float, n_max: int,
                       margin: float = 0.2) -> RadiusEstimate:
    """Smallest n such that B_d(x, m) stays in the ratio*m box for m in [n, n_max]."""
    x = tuple(int(c) for c in x)
    if not site_open(env, x):
        raise ValueError(f"center {x} is closed")
    working = int(math.ceil(ratio * n_max * (1.0 + margin))) + 1
    g = _working_graph(env, x, working)
    dist = hop_distances(g, g.index[x], max_depth=n_max)
    inf_dist = np.abs(g.vertices - np.array(x, dtype=np.int64)).max(axis=1)
    max_inf = np.zeros(n_max + 1)
    reached = dist >= 0
    for m in range(1, n_max + 1):
        sel = reached & (dist <= m)
        max_inf[m] = inf_dist[sel].max() if sel.any() else 0
    max_inf = np.maximum.accumulate(max_inf)
    rows, fails = [], []
    for m in range(1, n_max + 1):
        bad = max_inf[m] > ratio * m
        rows.append((m, max_inf[m], ratio * m, not bad))
        fails.append((m, bad))
    return RadiusEstimate.from_failures(fails, n_max, ratio, np.array(rows))


def reach_radius(env: Environment, x, ratio: float, n_max: int,
                 margin: float = 0.2) -> RadiusEstimate:
    """Smallest n such that every open y with |y-x|_inf <= m is within
    ratio*m hops of x, for all m in [n, n_max]."""
    x = tuple(int(c) for c in x)
    if not site_open(env, x):
        raise ValueError(f"center {x} is closed")
    working = int(math.ceil(ratio * n_max * (1.0 + margin))) + 1
    g = _working_graph(env, x, working)
    dist = hop_distances(g, g.index[x])
    inf_dist = np.abs(g.vertices - np.array(x, dtype=np.int64)).max(axis=1)
    hops = np.where(dist < 0, np.inf, dist.astype(np.float64))
    rows, fails = [], []
    for m in range(1, n_max + 1):
        in_box = inf_dist <= m
        worst = hops[in_box].max()
        bad = worst > ratio * m
        rows.append((m, worst, ratio * m, not bad))
        fails.append((m, bad))
    return RadiusEstimate.from_failures(fails, n_max, ratio, np.array(rows))


@dataclass
class ComparisonStats:
    """Ensemble of radius samples with empirical tails and fitted decay."""

    box_ratio: float
    hop_ratio: float
    n_max: int
    confinement: np.ndarray     # int samples
    reach: np.ndarray
    confinement_censored: int
    reach_censored: int
    skipped_closed_origin: int
    seeds: list[int] = field(default_factory=list)

    @staticmethod
    def tail(samples: np.ndarray, n: int) -> float:
        return float(np.mean(samples > n)) if len(samples) else math.nan

    def tail_curve(self, which: str, n_values) -> np.ndarray:
        samples = self.confinement if which == "confinement" else self.reach
        return np.array([self.tail(samples, n) for n in n_values])

    def fitted_decay(self, which: str, n_values) -> tuple[float, float]:
        """(intercept, slope) of an OLS fit of log tail vs n over positive tail."""
        curve = self.tail_curve(which, n_values)
        keep = curve > 0
        if keep.sum() < 2:
            return math.nan, math.nan
        ns = np.asarray(list(n_values), dtype=float)[keep]
        ys = np.log(curve[keep])
        slope, intercept = np.polyfit(ns, ys, 1)
        return float(intercept), float(slope)


def sample_comparison(env_template: Environment, n_envs: int, seed0: int,
                      box_ratio: float = 2.0, hop_ratio: float = 2.0,
                      n_max: int = 12, margin: float = 0.2) -> ComparisonStats:
    """Sample both radii at the origin across environments seed0, seed0+1, ...

    Environments whose origin is closed are skipped (and counted), matching
    the convention that statistics are collected at a conditioned-open site.
    """
    conf, reach_v = [], []
    conf_cens = reach_cens = skipped = 0
    seeds = []
    s = seed0
    while len(conf) < n_envs:
        env = Environment(dim=env_template.dim, p=env_template.p, seed=s,
                          law=env_template.law,
                          scan_limit=env_template.scan_limit)
        s += 1
        if not site_open(env, (0,) * env.dim):
            skipped += 1
            continue
        seeds.append(env.seed)
        u = confinement_radius(env, (0,) * env.dim, box_ratio, n_max, margin)
        v = reach_radius(env, (0,) * env.dim, hop_ratio, n_max, margin)
        conf.append(u.value)
        reach_v.append(v.value)
        conf_cens += u.censored
        reach_cens += v.censored
    return ComparisonStats(
        box_ratio=box_ratio, hop_ratio=hop_ratio, n_max=n_max,
        confinement=np.array(conf), reach=np.array(reach_v),
        confinement_censored=conf_cens, reach_censored=reach_cens,
        skipped_closed_origin=skipped, seeds=seeds)
