"""Isoperimetry, Poincare constants, and related certificates on box graphs.

The central quantity is the isoperimetric constant of an induced box graph:
the minimum of |boundary(A)| / m(A) over subsets with |A| <= |V|/2, where m
is the counting measure (vertex degree). Small instances are solved exactly
by subset enumeration; larger ones get certified two-sided bounds, with the
lower bound taken as the best of a spectral (Cheeger) bound and two
congestion bounds, one from shortest-path flows and one from rerouted
all-pairs unit currents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _kernels as kernels
from .environment import Environment, FiniteGraph, restrict_to_box
from .errors import (DisconnectedGraphError, EigensolverError,
                     ResourceLimitError, TruncationError)
from .metrics import hop_distances

__all__ = [
    "SubsetCut", "edge_boundary", "projection_sizes", "loomis_whitney_check",
    "isoperimetric_constant", "CheegerBounds", "cheeger_bounds",
    "ScalingSample", "cheeger_scaling_scan",
    "DensityReport", "density_report", "default_line_count",
    "PoincareReport", "poincare_constant", "weighted_poincare",
    "NashProbeReport", "nash_probe", "boundary_projection_frontier",
]

EXHAUSTIVE_CAP = 22
_DENSE_EIG_CAP = 3200


# ---------------------------------------------------------------------------
# subsets, boundaries, projections

@dataclass(frozen=True)
class SubsetCut:
    """A vertex subset with its boundary and projection statistics."""

    indices: tuple[int, ...]            # sorted vertex indices
    boundary_edges: tuple[int, ...]     # edge indices with one endpoint inside
    projection_sizes: tuple[int, ...]   # per dropped axis
    measure: int                        # m(A) = sum of degrees

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def ratio(self) -> Fraction:
        """|boundary| / m(A); zero for edge-free subsets."""
        if self.measure == 0:
            assert not self.boundary_edges
            return Fraction(0)
        return Fraction(len(self.boundary_edges), self.measure)


def _as_indices(graph: FiniteGraph, subset) -> np.ndarray:
    arr = list(subset)
    if arr and isinstance(arr[0], tuple):
        arr = [graph.index[t] for t in arr]
    return np.asarray(sorted(arr), dtype=np.int64)


def edge_boundary(graph: FiniteGraph, subset) -> np.ndarray:
    """Indices of edges with exactly one endpoint in the subset.

    Accepts vertex indices or coordinate tuples. Self-loops never qualify.
    """
    idx = _as_indices(graph, subset)
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[idx] = True
    return np.flatnonzero(inside[graph.edge_u] != inside[graph.edge_v])


def projection_sizes(coords: np.ndarray) -> tuple[int, ...]:
    """Number of distinct images when dropping each axis in turn.

    For d = 1 dropping the only axis maps everything to a point, so the
    size is 1 for any nonempty set.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2:
        raise ValueError("coords must be (k, d)")
    k, d = coords.shape
    out = []
    for axis in range(d):
        kept = np.delete(coords, axis, axis=1)
        if kept.shape[1] == 0:
            out.append(1 if k else 0)
        else:
            out.append(len(np.unique(kept, axis=0)))
    return tuple(out)


def loomis_whitney_check(coords: np.ndarray) -> bool:
    """sum_i |proj_i(A)| >= d * |A|^(1-1/d), checked in exact integers."""
    coords = np.asarray(coords, dtype=np.int64)
    k, d = coords.shape
    if k == 0:
        return True
    total = sum(projection_sizes(coords))
    # total >= d * k^((d-1)/d)  <=>  total^d >= d^d * k^(d-1)
    return total ** d >= d ** d * k ** (d - 1)


def _make_cut(graph: FiniteGraph, idx: np.ndarray) -> SubsetCut:
    bnd = edge_boundary(graph, idx)
    return SubsetCut(
        indices=tuple(int(i) for i in idx),
        boundary_edges=tuple(int(e) for e in bnd),
        projection_sizes=projection_sizes(graph.vertices[idx]),
        measure=int(graph.degrees[idx].sum()),
    )


# ---------------------------------------------------------------------------
# exact isoperimetric constant

def isoperimetric_constant(graph: FiniteGraph,
                           cap: int = EXHAUSTIVE_CAP) -> tuple[Fraction, SubsetCut]:
    """Exact min of |boundary(A)|/m(A) over nonempty A with |A| <= |V|/2.

    Exhaustive over all 2^|V| subsets, so |V| must not exceed `cap`. Ratios
    are compared exactly (integer cross-multiplication); ties go to the
    subset with the smallest bitmask, making the witness deterministic.
    Returns 0 exactly when the graph is disconnected.
    """
    n = graph.n_vertices
    if n > cap:
        raise ResourceLimitError(
            f"{n} vertices > exhaustive cap {cap}; use cheeger_bounds")
    if n <= 1:
        raise ValueError("no admissible subsets with |A| <= |V|/2")
    deg = graph.degrees.astype(np.int64)
    eu = graph.edge_u.astype(np.int64)
    ev = graph.edge_v.astype(np.int64)
    half = n // 2
    shifts = np.arange(n, dtype=np.uint32)

    best_num, best_den, best_id = None, None, None
    chunk = 1 << 18
    for lo in range(1, 1 << n, chunk):
        ids = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.uint32)
        bits = ((ids[:, None] >> shifts[None, :]) & 1).astype(np.int64)
        sizes = bits.sum(axis=1)
        keep = (sizes >= 1) & (sizes <= half)
        if not keep.any():
            continue
        bits = bits[keep]
        ids = ids[keep]
        den = bits @ deg
        num = (bits[:, eu] != bits[:, ev]).sum(axis=1)
        # m(A) = 0 forces an empty boundary; normalize those to 0/1
        zero_m = den == 0
        if zero_m.any():
            assert not num[zero_m].any()
            den = np.where(zero_m, 1, den)
        approx = num / den
        cmin = approx.min()
        for j in np.flatnonzero(approx <= cmin * (1 + 1e-9) + 1e-18):
            a, b = int(num[j]), int(den[j])
            if best_num is None or a * best_den < best_num * b:
                best_num, best_den, best_id = a, b, int(ids[j])
    idx = np.flatnonzero([(best_id >> k) & 1 for k in range(n)]).astype(np.int64)
    return Fraction(best_num, best_den), _make_cut(graph, idx)


# ---------------------------------------------------------------------------
# spectral machinery

def _pencil_gap(lap: scipy.sparse.spmatrix, mvec: np.ndarray,
                need_vector: bool = True) -> tuple[float, np.ndarray | None]:
    """Second-smallest eigenvalue of L f = lam * diag(m) f, plus eigenvector."""
    n = lap.shape[0]
    if n == 1:
        return math.inf, None
    if (mvec <= 0).any():
        raise EigensolverError("vertex measure must be positive")
    if n <= _DENSE_EIG_CAP:
        dense = lap.toarray()
        w, v = scipy.linalg.eigh(dense, np.diag(mvec))
        return float(w[1]), v[:, 1]
    # Large case: locally optimal block PCG constrained against constants.
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal((n, 1))
    ones = np.ones((n, 1))
    try:
        w, v = scipy.sparse.linalg.lobpcg(
            lap.tocsr(), x0, B=scipy.sparse.diags(mvec).tocsr(), Y=ones,
            tol=1e-10, maxiter=600, largest=False)
    except Exception as exc:  # pragma: no cover - solver internals
        raise EigensolverError(f"lobpcg failed: {exc}") from exc
    lam = float(w[0])
    vec = v[:, 0]
    resid = float(np.linalg.norm(lap @ vec - lam * mvec * vec))
    if not math.isfinite(lam) or resid > 1e-6 * max(1.0, abs(lam)):
        raise EigensolverError(f"eigenpair residual {resid:.3e} too large")
    return lam, (vec if need_vector else None)


def _require_simple_connected(graph: FiniteGraph) -> None:
    if graph.n_vertices == 0:
        raise ValueError("empty graph")
    if (graph.edge_u == graph.edge_v).any():
        raise ValueError("self-loops are not supported here")
    hops = hop_distances(graph, 0)
    if (hops < 0).any():
        raise DisconnectedGraphError("graph is not connected")


@dataclass(frozen=True)
class CheegerBounds:
    """Certified bracket lower <= I(g) <= upper for the isoperimetric constant.

    spectral_lower is (min_deg/max_deg) * lambda2/2 with lambda2 the gap of
    the degree-normalized Laplacian. flow_lower is |V| / (2 * max_deg * C)
    where C is the worst per-edge congestion when one unit is routed between
    every unordered vertex pair along shortest paths (split equally among
    them): every such pair with one endpoint on each side crosses the cut, so
    |boundary(A)| >= |A| |V| / (2C). electrical_lower routes deg(s)*deg(t)
    units between every pair as superposed unit currents and reads off
    vol(V) / (2C) from the worst gross edge load; a few multiplicative
    reroutes (penalizing loaded edges) tighten it, and every pass is a
    feasible flow, so each certifies the bound on its own. The upper bound
    is the best sweep cut of the Fiedler vector and is attained by a
    genuine subset.
    """

    lower: float
    upper: float
    spectral_lower: float
    flow_lower: float
    electrical_lower: float
    lambda2: float
    congestion: float
    upper_witness: SubsetCut


def _sweep_upper(graph: FiniteGraph, fiedler: np.ndarray) -> tuple[Fraction, np.ndarray]:
    n = graph.n_vertices
    coords = graph.vertices
    order_keys = tuple(coords[:, a] for a in range(coords.shape[1] - 1, -1, -1))
    order = np.lexsort(order_keys + (fiedler,))
    deg = graph.degrees.astype(np.int64)

    best: tuple[int, int] | None = None
    best_prefix: np.ndarray | None = None
    # adjacency for incremental cut updates
    indptr, indices = graph.adj_indptr, graph.adj_indices
    for direction in (order, order[::-1]):
        inside = np.zeros(n, dtype=bool)
        cut = 0
        mass = 0
        for k in range(n // 2):
            v = int(direction[k])
            internal = int(inside[indices[indptr[v]:indptr[v + 1]]].sum())
            cut += int(deg[v]) - 2 * internal
            mass += int(deg[v])
            inside[v] = True
            if mass == 0:
                continue
            if best is None or cut * best[1] < best[0] * mass:
                best = (cut, mass)
                best_prefix = direction[:k + 1].copy()
    assert best is not None and best_prefix is not None
    return Fraction(best[0], best[1]), np.sort(best_prefix)


def _flow_congestion(graph: FiniteGraph) -> float:
    flow = kernels.brandes_edge_flow(
        graph.adj_indptr, graph.adj_indices, graph.adj_edge, graph.n_edges)
    return float(np.max(flow))


_ELECTRICAL_CAP = 2500
_REROUTE_PASSES = 4
_EDGE_BLOCK = 1024


def _electrical_flow_lower(graph: FiniteGraph) -> float:
    """Congestion bound from degree-weighted all-pairs unit currents.

    Routing deg(s)*deg(t) units between every unordered pair, the gross load
    on an edge is sum_{s<t} deg(s) deg(t) |a_s - a_t| with a the difference
    of the two pseudo-inverse rows at the edge's endpoints; sorting a makes
    that a single prefix-sum pass per edge. Any cut A with vol(A) <= vol/2
    separates demand >= vol(A) vol(V)/2, all of it through boundary edges,
    so I(g) >= vol(V) / (2 max-load). Edges are then penalized by their
    relative load and the currents recomputed; the best pass wins.
    """
    n = graph.n_vertices
    if n > _ELECTRICAL_CAP or graph.n_edges == 0:
        return 0.0
    deg = graph.degrees.astype(np.float64)
    vol = deg.sum()
    eu, ev = graph.edge_u, graph.edge_v
    cond = np.ones(graph.n_edges)
    best = 0.0
    for _ in range(_REROUTE_PASSES):
        lap = graph.laplacian(cond).toarray()
        # rank-one shift inverts the pinv on the mean-zero complement
        linv = np.linalg.inv(lap + 1.0 / n) - 1.0 / n
        loads = np.empty(graph.n_edges)
        for lo in range(0, graph.n_edges, _EDGE_BLOCK):
            sl = slice(lo, min(lo + _EDGE_BLOCK, graph.n_edges))
            a = (linv[eu[sl]] - linv[ev[sl]]) * cond[sl, None]
            order = np.argsort(a, axis=1)
            asort = np.take_along_axis(a, order, axis=1)
            wsort = deg[order]
            wcum = np.cumsum(wsort, axis=1)
            loads[sl] = np.abs(
                np.sum(wsort * asort * (2.0 * wcum - wsort - vol), axis=1))
        worst = loads.max()
        best = max(best, vol / (2.0 * worst))
        cond *= np.exp(-loads / worst)
        cond /= cond.max()
    return best


def cheeger_bounds(graph: FiniteGraph) -> CheegerBounds:
    """Two-sided bounds on the isoperimetric constant of a connected graph."""
    _require_simple_connected(graph)
    n = graph.n_vertices
    deg = graph.degrees.astype(np.float64)
    if n == 1:
        cut = _make_cut(graph, np.array([0], dtype=np.int64))
        return CheegerBounds(math.inf, math.inf, math.inf, math.inf,
                             math.inf, math.inf, 0.0, cut)
    lap = graph.laplacian(np.ones(graph.n_edges))
    lam2, fiedler = _pencil_gap(lap, deg)
    spectral = (deg.min() / deg.max()) * lam2 / 2.0
    cong = _flow_congestion(graph)
    flow = n / (2.0 * deg.max() * cong)
    electrical = _electrical_flow_lower(graph)
    upper_frac, prefix = _sweep_upper(graph, fiedler)
    cut = _make_cut(graph, prefix)
    assert cut.ratio == upper_frac
    return CheegerBounds(
        lower=max(spectral, flow, electrical), upper=float(upper_frac),
        spectral_lower=spectral, flow_lower=flow, electrical_lower=electrical,
        lambda2=lam2, congestion=cong, upper_witness=cut)


# ---------------------------------------------------------------------------
# scaling scan over an environment ensemble

@dataclass(frozen=True)
class ScalingSample:
    seed: int
    n: int
    n_vertices: int
    connected: bool
    lower: float
    upper: float
    scaled_lower: float     # n * lower


def cheeger_scaling_scan(env_template: Environment, seeds, n_values,
                         center=None) -> list[ScalingSample]:
    """Cheeger lower bounds on box graphs across environments and radii.

    Disconnected samples are recorded with connected=False and NaN bounds;
    the isoperimetric constant is 0 there by definition, so they are left
    out of scaling summaries but stay countable.
    """
    center = tuple([0] * env_template.dim) if center is None else tuple(center)
    out = []
    for seed in seeds:
        env = Environment(dim=env_template.dim, p=env_template.p, seed=int(seed),
                          law=env_template.law, scan_limit=env_template.scan_limit)
        for n in sorted(n_values):
            g = restrict_to_box(env, center, int(n))
            if g.n_vertices == 0:
                out.append(ScalingSample(int(seed), int(n), 0, False,
                                         math.nan, math.nan, math.nan))
                continue
            try:
                b = cheeger_bounds(g)
            except DisconnectedGraphError:
                out.append(ScalingSample(int(seed), int(n), g.n_vertices, False,
                                         math.nan, math.nan, math.nan))
                continue
            out.append(ScalingSample(int(seed), int(n), g.n_vertices, True,
                                     b.lower, b.upper, n * b.lower))
    return out


def scaling_summary(samples: list[ScalingSample]) -> dict[int, dict[str, float]]:
    """Per-radius min/median of n*lower over the connected samples."""
    by_n: dict[int, list[float]] = {}
    skipped: dict[int, int] = {}
    for s in samples:
        if s.connected:
            by_n.setdefault(s.n, []).append(s.scaled_lower)
        else:
            skipped[s.n] = skipped.get(s.n, 0) + 1
    return {
        n: {"min": float(np.min(v)), "median": float(np.median(v)),
            "count": float(len(v)), "skipped": float(skipped.get(n, 0))}
        for n, v in sorted(by_n.items())
    }


# ---------------------------------------------------------------------------
# line and projection densities

def default_line_count(p: float) -> int:
    """Smallest L with (1-p)^L <= 1/4; 1 when every site is open."""
    if p >= 1.0:
        return 1
    return max(1, math.ceil(math.log(4.0) / -math.log1p(-p)))


@dataclass(frozen=True)
class DensityReport:
    """Occupancy densities of axis lines and L-fold line unions in a box.

    line densities are |open sites on an axis segment| / (2n+1) over every
    axis and offset; a flag counts densities outside [p/2, 2p]. projection
    densities take L parallel segments (consecutive offsets along the
    dropped axis), mark a position occupied when any of the L segments is
    open there, and are flagged below 1 - 2(1-p)^L.
    """

    n: int
    p: float
    L: int
    line_min: float
    line_max: float
    line_violations: int
    n_lines: int
    projection_min: float
    projection_violations: int
    n_windows: int

    @property
    def projection_floor(self) -> float:
        return 1.0 - 2.0 * (1.0 - self.p) ** self.L


def density_report(env: Environment, n: int, L: int | None = None) -> DensityReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    L = default_line_count(env.p) if L is None else int(L)
    side = 2 * n + 1
    lo = tuple([-n] * env.dim)
    shape = tuple([side] * env.dim)
    mask = kernels.open_mask_box(env.seed, env.p, lo, shape)

    line_min, line_max = 1.0, 0.0
    violations = 0
    n_lines = 0
    eps = 1e-12
    for axis in range(env.dim):
        counts = mask.sum(axis=axis, dtype=np.int64).ravel()
        dens = counts / side
        line_min = min(line_min, float(dens.min()))
        line_max = max(line_max, float(dens.max()))
        violations += int(((dens < env.p / 2 - eps) | (dens > 2 * env.p + eps)).sum())
        n_lines += dens.size

    proj_min = math.nan
    proj_violations = 0
    n_windows = 0
    if env.dim >= 2 and L <= side:
        floor = 1.0 - 2.0 * (1.0 - env.p) ** L
        pmin = 1.0
        for drop_axis in range(env.dim):
            windows = np.lib.stride_tricks.sliding_window_view(
                mask, L, axis=drop_axis)
            union = windows.any(axis=-1)
            for keep_axis in range(env.dim):
                if keep_axis == drop_axis:
                    continue
                counts = union.sum(axis=keep_axis, dtype=np.int64).ravel()
                dens = counts / side
                pmin = min(pmin, float(dens.min()))
                proj_violations += int((dens < floor - eps).sum())
                n_windows += dens.size
        proj_min = pmin

    return DensityReport(n=n, p=env.p, L=L, line_min=line_min,
                         line_max=line_max, line_violations=violations,
                         n_lines=n_lines, projection_min=proj_min,
                         projection_violations=proj_violations,
                         n_windows=n_windows)


# ---------------------------------------------------------------------------
# Poincare constants

@dataclass(frozen=True)
class PoincareReport:
    """Best C with inf_a sum (f-a)^2 m <= C * sum_e w_e (grad f)^2.

    The best constant is exactly 1/spectral_gap of the pencil
    (weighted Laplacian, diag(m)); the Fiedler eigenfunction attains it.
    """

    constant: float
    spectral_gap: float
    weight_profile: str
    n_vertices: int
    radius: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def scaled(self) -> float:
        """constant / radius^2 (NaN without a radius)."""
        return self.constant / self.radius ** 2 if self.radius else math.nan


def poincare_constant(graph: FiniteGraph,
                      edge_weights: np.ndarray | None = None,
                      vertex_measure: np.ndarray | None = None,
                      radius: int | None = None) -> PoincareReport:
    """Exact best Poincare constant on a connected graph.

    Defaults: unit edge weights and the counting measure (degrees). The
    variational identity C = 1/lambda2 of (L_w, diag(m)) is what is
    computed; callers can cross-check with explicit functions.
    """
    _require_simple_connected(graph)
    w = np.ones(graph.n_edges) if edge_weights is None else np.asarray(edge_weights, float)
    m = graph.degrees.astype(np.float64) if vertex_measure is None \
        else np.asarray(vertex_measure, float)
    if graph.n_vertices == 1:
        return PoincareReport(0.0, math.inf, "uniform", 1, radius)
    lam2, _ = _pencil_gap(graph.laplacian(w), m)
    if lam2 <= 0:
        raise EigensolverError(f"nonpositive spectral gap {lam2}")
    return PoincareReport(1.0 / lam2, lam2, "uniform", graph.n_vertices, radius)


def weighted_poincare(env: Environment, center, n: int,
                      working_radius: int | None = None) -> PoincareReport:
    """Poincare constant on the hop ball of radius n with a quadratic cutoff.

    The weight phi(y) = ((n ^ dist(y, complement of the ball)) / n)^2
    multiplies the vertex measure on the left-hand side; an edge gets
    min(phi(u), phi(v)) on the right. Everything is materialized inside a
    working box large enough that all hop distances involved are exact:
    every vertex within 3n+2 hops of the center must have its full degree
    inside the box, else a TruncationError asks for a bigger box.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    center = tuple(int(c) for c in center)
    if working_radius is None:
        working_radius = math.ceil((3 * n + 4) * 1.7 / env.p) + 2
    g = restrict_to_box(env, center, working_radius)
    if center not in g.index:
        raise ValueError(f"center {center} is not an open site")
    src = g.index[center]
    hops = hop_distances(g, src)

    guard = 3 * n + 2
    trusted = (hops >= 0) & (hops <= guard)
    if (g.degrees[trusted] < 2 * env.dim).any():
        raise TruncationError(
            f"working radius {working_radius} too small: a vertex within "
            f"{guard} hops of the center is missing edges")

    ball = (hops >= 0) & (hops <= n)
    if not (~ball).any():
        raise TruncationError("ball covers the whole working box")

    # distance from each ball vertex to the complement (multi-source BFS)
    from collections import deque
    dist_out = np.full(g.n_vertices, -1, dtype=np.int64)
    dq = deque()
    for v in np.flatnonzero(~ball):
        dist_out[v] = 0
        dq.append(int(v))
    indptr, indices = g.adj_indptr, g.adj_indices
    while dq:
        v = dq.popleft()
        for ptr in range(indptr[v], indptr[v + 1]):
            u = indices[ptr]
            if dist_out[u] < 0:
                dist_out[u] = dist_out[v] + 1
                dq.append(u)

    ball_idx = np.flatnonzero(ball)
    phi_ball = (np.minimum(n, dist_out[ball_idx]) / n) ** 2
    assert (phi_ball > 0).all()

    # induced subgraph on the ball
    local = -np.ones(g.n_vertices, dtype=np.int64)
    local[ball_idx] = np.arange(len(ball_idx))
    keep = ball[g.edge_u] & ball[g.edge_v]
    eu = local[g.edge_u[keep]]
    ev = local[g.edge_v[keep]]
    k = len(ball_idx)
    degrees = np.zeros(k, dtype=np.int64)
    np.add.at(degrees, eu, 1)
    np.add.at(degrees, ev, 1)
    wmin = np.minimum(phi_ball[eu], phi_ball[ev])

    rows = np.concatenate([eu, ev, eu, ev])
    cols = np.concatenate([ev, eu, eu, ev])
    vals = np.concatenate([-wmin, -wmin, wmin, wmin])
    lap = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(k, k)).tocsr()

    mvec = phi_ball * degrees
    if (mvec <= 0).any():
        # isolated ball vertices would break the pencil; the ball of a
        # connected graph cannot contain them
        raise EigensolverError("degenerate vertex measure on the ball")
    lam2, _ = _pencil_gap(lap, mvec)
    if lam2 <= 0:
        raise EigensolverError(f"nonpositive weighted gap {lam2}")
    return PoincareReport(
        constant=1.0 / lam2, spectral_gap=lam2, weight_profile="cutoff-squared",
        n_vertices=k, radius=n,
        extras={"working_radius": working_radius,
                "phi_min": float(phi_ball.min()),
                "ball_hops_max": int(hops[ball_idx].max())})


# ---------------------------------------------------------------------------
# Nash probe study and boundary/projection frontier

@dataclass(frozen=True)
class NashProbeReport:
    """min over probe functions f of D(f) ||f||_1^(4/d) / ||f||_2^(2+4/d).

    D is the unweighted Dirichlet sum over edges and the norms use the
    counting measure. Any single f gives an upper bound on the best Nash
    constant; a positive, box-stable minimum is evidence (not proof) that
    a uniform constant exists.
    """

    min_ratio: float
    median_ratio: float
    n_probes: int
    argmin: str


def _nash_ratio(graph: FiniteGraph, f: np.ndarray, d: int) -> float:
    df = f[graph.edge_u] - f[graph.edge_v]
    dirichlet = float(df @ df)
    if dirichlet == 0.0:
        return math.inf
    m = graph.degrees.astype(np.float64)
    l1 = float(np.abs(f) @ m)
    l2sq = float((f * f) @ m)
    return dirichlet * l1 ** (4 / d) / l2sq ** (1 + 2 / d)


def nash_probe(graph: FiniteGraph, n_random: int = 200,
               seed: int = 0) -> NashProbeReport:
    """Probe the Nash inequality with indicators, tents, and random signs."""
    _require_simple_connected(graph)
    d = graph.dim
    ratios: list[tuple[float, str]] = []
    n = graph.n_vertices
    for v in range(n):
        f = np.zeros(n)
        f[v] = 1.0
        ratios.append((_nash_ratio(graph, f, d), f"indicator:{v}"))
    hops0 = hop_distances(graph, 0).astype(np.float64)
    for r in (1, 2, 4, 8):
        tent = np.maximum(0.0, r - hops0)
        if tent.max() > 0 and not (tent == tent[0]).all():
            ratios.append((_nash_ratio(graph, tent, d), f"tent:{r}"))
        ball = (hops0 <= r).astype(np.float64)
        ratios.append((_nash_ratio(graph, ball, d), f"ball:{r}"))
    rng = np.random.default_rng(seed)
    for j in range(n_random):
        f = rng.choice([-1.0, 1.0], size=n)
        ratios.append((_nash_ratio(graph, f, d), f"random:{j}"))
    finite = [(r, tag) for r, tag in ratios if math.isfinite(r)]
    if not finite:
        raise ValueError("all probes were constant")
    vals = np.array([r for r, _ in finite])
    k = int(np.argmin(vals))
    return NashProbeReport(min_ratio=float(vals[k]),
                           median_ratio=float(np.median(vals)),
                           n_probes=len(finite), argmin=finite[k][1])


def boundary_projection_frontier(graph: FiniteGraph, epsilon: float = 0.1,
                                 n_samples: int = 500, seed: int = 0
                                 ) -> tuple[float, list[tuple[int, float]]]:
    """Sampled min of |boundary(A)| / sum_i |proj_i(A)| over small-enough A.

    Restricted to random subsets with |A| < (1-epsilon)|V|; the claim that
    this ratio is bounded below for such subsets is only spot-checked, never
    certified. Returns (min ratio, per-sample (size, ratio) table).
    """
    n = graph.n_vertices
    cap = int((1 - epsilon) * n)
    if cap < 1:
        raise ValueError("epsilon leaves no admissible subsets")
    rng = np.random.default_rng(seed)
    table = []
    best = math.inf
    for _ in range(n_samples):
        k = int(rng.integers(1, cap + 1))
        idx = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
        cut = _make_cut(graph, idx)
        denom = sum(cut.projection_sizes)
        ratio = len(cut.boundary_edges) / denom
        table.append((k, ratio))
        best = min(best, ratio)
    return best, table
