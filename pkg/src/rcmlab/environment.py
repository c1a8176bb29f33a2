"""Random environment: percolated sites, long-range edges, conductances.

An Environment is a pure function of (dim, p, seed, law): site openness and
edge conductances are derived from a counter-based hash, so any query gives
the same answer in any order, on any backend, in any process. Edges connect
consecutive open sites along each coordinate axis and are keyed by their
lesser endpoint and the axis; their lengths are the gaps between open sites
(geometric with success probability p).

Finite windows come in two flavors: ``restrict_to_box`` keeps exactly the
edges with both endpoints in a box (interior sites of an edge are closed by
construction, so per-line consecutive pairing is exact), and ``periodize``
wraps each axis line of a box into a cycle, which keeps every open site at
full degree 2*dim and is the right setting for corrector and spectral work.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .errors import ClosedLineError, ResourceLimitError, ScanLimitError

_LAW_CODES = {
    "constant": kern.LAW_CONSTANT,
    "pareto": kern.LAW_PARETO,
    "shifted_exponential": kern.LAW_SHIFTED_EXPONENTIAL,
    "two_point": kern.LAW_TWO_POINT,
}


@dataclass(frozen=True)
class ConductanceLaw:
    """Distribution of edge conductances; all laws are supported on [1, inf).

    kinds and parameters:
      constant(value)             point mass at value >= 1
      pareto(shape)               density shape * v**-(shape+1) on [1, inf)
      shifted_exponential(rate)   1 + Exp(rate)
      two_point(lo, hi, p_hi)     hi with probability p_hi, else lo
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _LAW_CODES:
            raise ValueError(f"unknown conductance law {self.kind!r}")
        q = self.params
        if self.kind == "constant":
            if len(q) != 1 or q[0] < 1.0:
                raise ValueError("constant law needs one value >= 1")
        elif self.kind == "pareto":
            if len(q) != 1 or q[0] <= 0.0:
                raise ValueError("pareto law needs shape > 0")
        elif self.kind == "shifted_exponential":
            if len(q) != 1 or q[0] <= 0.0:
                raise ValueError("shifted_exponential law needs rate > 0")
        else:
            if len(q) != 3 or q[0] < 1.0 or q[1] < 1.0 or not 0.0 <= q[2] <= 1.0:
                raise ValueError("two_point law needs lo >= 1, hi >= 1, "
                                 "p_hi in [0, 1]")

    @classmethod
    def constant(cls, value: float = 1.0) -> "ConductanceLaw":
        return cls("constant", (float(value),))

    @classmethod
    def pareto(cls, shape: float) -> "ConductanceLaw":
        return cls("pareto", (float(shape),))

    @classmethod
    def shifted_exponential(cls, rate: float) -> "ConductanceLaw":
        return cls("shifted_exponential", (float(rate),))

    @classmethod
    def two_point(cls, lo: float, hi: float, p_hi: float) -> "ConductanceLaw":
        return cls("two_point", (float(lo), float(hi), float(p_hi)))

    @property
    def code(self) -> int:
        return _LAW_CODES[self.kind]

    @property
    def packed_params(self) -> tuple[float, float, float]:
        q = self.params + (0.0,) * (3 - len(self.params))
        return q  # type: ignore[return-value]

    def mean(self) -> float:
        """E[mu]; inf for pareto with shape <= 1."""
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "pareto":
            a = self.params[0]
            return a / (a - 1.0) if a > 1.0 else math.inf
        if self.kind == "shifted_exponential":
            return 1.0 + 1.0 / self.params[0]
        lo, hi, p_hi = self.params
        return lo * (1.0 - p_hi) + hi * p_hi

    def transform(self, u: float) -> float:
        return kern.law_transform(u, self.code, self.packed_params)

    def to_json(self) -> dict:
        names = {
            "constant": ("value",),
            "pareto": ("shape",),
            "shifted_exponential": ("rate",),
            "two_point": ("lo", "hi", "p_hi"),
        }[self.kind]
        out = {"kind": self.kind}
        out.update(dict(zip(names, self.params)))
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ConductanceLaw":
        kind = obj.get("kind")
        if kind == "constant":
            return cls.constant(obj["value"])
        if kind == "pareto":
            return cls.pareto(obj["shape"])
        if kind == "shifted_exponential":
            return cls.shifted_exponential(obj["rate"])
        if kind == "two_point":
            return cls.two_point(obj["lo"], obj["hi"], obj["p_hi"])
        raise ValueError(f"unknown conductance law {kind!r}")


def default_scan_limit(p: float) -> int:
    # P(gap > 64/p) <= (1-p)^(64/p) < e^-64: unreachable in practice, and
    # hitting it raises rather than truncating.
    return int(math.ceil(64.0 / p))


@dataclass(frozen=True)
class Environment:
    """Deterministic sampling view of one disordered environment."""

    dim: int
    p: float
    seed: int
    law: ConductanceLaw
    scan_limit: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.scan_limit is None:
            object.__setattr__(self, "scan_limit", default_scan_limit(self.p))
        elif self.scan_limit < 1:
            raise ValueError("scan_limit must be >= 1")

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "dim": self.dim,
            "p": self.p,
            "seed": self.seed,
            "law": self.law.to_json(),
            "scan_limit": self.scan_limit,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Environment":
        return cls(
            dim=int(obj["dim"]),
            p=float(obj["p"]),
            seed=int(obj["seed"]),
            law=ConductanceLaw.from_json(obj["law"]),
            scan_limit=obj.get("scan_limit"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Environment":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class EdgeRecord:
    """One edge: lesser endpoint along its axis, axis index (0-based),
    length (number of lattice steps), and conductance."""

    base: tuple[int, ...]
    axis: int
    length: int
    conductance: float

    @property
    def head(self) -> tuple[int, ...]:
        out = list(self.base)
        out[self.axis] += self.length
        return tuple(out)


def site_open(env: Environment, x) -> bool:
    x = tuple(int(c) for c in x)
    if len(x) != env.dim:
        raise ValueError(f"expected {env.dim} coordinates, got {len(x)}")
    return kern.site_open(env.seed, env.p, x)


def neighbor_along_axis(env: Environment, x, axis: int, direction: int) -> EdgeRecord:
    """Edge from open site x to the nearest open site along +-axis.

    direction is +1 or -1. Raises ScanLimitError if no open site shows up
    within env.scan_limit steps.
    """
    x = tuple(int(c) for c in x)
    if not 0 <= axis < env.dim:
        raise ValueError(f"axis {axis} out of range for dim {env.dim}")
    if direction not in (-1, 1):
        raise ValueError("direction must be +1 or -1")
    y = list(x)
    for h in range(1, env.scan_limit + 1):
        y[axis] = x[axis] + direction * h
        if kern.site_open(env.seed, env.p, y):
            base = x if direction > 0 else tuple(y)
            cond = kern.conductance_scalar(
                env.seed, env.law.code, env.law.packed_params, base, axis)
            return EdgeRecord(base=base, axis=axis, length=h, conductance=cond)
    raise ScanLimitError(
        f"no open site within {env.scan_limit} steps of {x} along axis "
        f"{axis}, direction {direction:+d}")


def edge_conductance(env: Environment, base, axis: int) -> float:
    """Conductance of the edge keyed by (base, axis); base must be open."""
    base = tuple(int(c) for c in base)
    if not site_open(env, base):
        raise ValueError(f"edge key {base} axis {axis}: base site is closed")
    return kern.conductance_scalar(
        env.seed, env.law.code, env.law.packed_params, base, axis)


def total_rate(env: Environment, x) -> float:
    """Total conductance mu(x) incident to open site x (2*dim edges)."""
    return sum(
        neighbor_along_axis(env, x, axis, sign).conductance
        for axis in range(env.dim)
        for sign in (-1, 1)
    )


class FiniteGraph:
    """A finite window of an environment: vertices, edges, adjacency.

    Vertices are lattice tuples in lexicographic order. Each edge appears
    once in ``edges`` (with endpoint indices in edge_u/edge_v and true
    displacement edge_disp, including winding for periodized graphs) and
    twice in the half-edge adjacency. A torus line with a single open site
    yields a self-loop whose displacement is the full period.
    """

    def __init__(self, env, center, radius, periodic, vertices, edges,
                 edge_u, edge_v, edge_disp):
        self.env = env
        self.dim = env.dim
        self.center = tuple(int(c) for c in center)
        self.radius = int(radius)
        self.periodic = bool(periodic)
        self.period = 2 * self.radius + 1 if periodic else None
        self.vertices = vertices            # (V, d) int64 array
        self.edges = edges                  # list[EdgeRecord]
        self.edge_u = edge_u                # (E,) int32
        self.edge_v = edge_v                # (E,) int32
        self.edge_disp = edge_disp          # (E, d) int64, v relative to u
        self.index = {tuple(v): i for i, v in enumerate(vertices.tolist())}
        self._build_adjacency()
        self._full_rates: np.ndarray | None = None

    def _build_adjacency(self):
        n = len(self.vertices)
        deg = np.zeros(n, dtype=np.int64)
        for u, v in zip(self.edge_u, self.edge_v):
            deg[u] += 1
            deg[v] += 1
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        nbr = np.zeros(indptr[-1], dtype=np.int32)
        slot_edge = np.zeros(indptr[-1], dtype=np.int32)
        slot_sign = np.zeros(indptr[-1], dtype=np.int8)
        fill = indptr[:-1].copy()
        for e, (u, v) in enumerate(zip(self.edge_u, self.edge_v)):
            nbr[fill[u]] = v
            slot_edge[fill[u]] = e
            slot_sign[fill[u]] = 1
            fill[u] += 1
            nbr[fill[v]] = u
            slot_edge[fill[v]] = e
            slot_sign[fill[v]] = -1
            fill[v] += 1
        self.adj_indptr = indptr
        self.adj_indices = nbr
        self.adj_edge = slot_edge
        self.adj_sign = slot_sign
        self.degrees = deg
        cond = np.array([e.conductance for e in self.edges], dtype=np.float64)
        self.edge_conductance = cond
        rate = np.zeros(n, dtype=np.float64)
        np.add.at(rate, self.edge_u, cond)
        np.add.at(rate, self.edge_v, cond)
        self.graph_rates = rate

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def half_edges(self, i: int):
        """Iterate (neighbor index, conductance, displacement) at vertex i."""
        for ptr in range(self.adj_indptr[i], self.adj_indptr[i + 1]):
            e = self.adj_edge[ptr]
            disp = self.edge_disp[e] * self.adj_sign[ptr]
            yield int(self.adj_indices[ptr]), float(self.edge_conductance[e]), disp

    def full_rates(self) -> np.ndarray:
        """Ambient total rate mu(x) per vertex.

        On a torus this is the graph rate. On a box restriction it includes
        edges that leave the box, so it is computed by scanning the infinite
        environment (cached).
        """
        if self._full_rates is None:
            if self.periodic:
                self._full_rates = self.graph_rates
            else:
                self._full_rates = np.array(
                    [total_rate(self.env, tuple(v)) for v in self.vertices.tolist()],
                    dtype=np.float64)
        return self._full_rates

    def laplacian(self, edge_weights=None):
        """Sparse weighted graph Laplacian L = D - W (self-loops drop out)."""
        import scipy.sparse as sp

        w = self.edge_conductance if edge_weights is None else np.asarray(edge_weights)
        keep = self.edge_u != self.edge_v
        u, v, wk = self.edge_u[keep], self.edge_v[keep], w[keep]
        n = self.n_vertices
        rows = np.concatenate([u, v, u, v])
        cols = np.concatenate([v, u, u, v])
        vals = np.concatenate([-wk, -wk, wk, wk])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def counting_adjacency(self):
        """Sparse adjacency with multiplicity 1 per edge (self-loops kept)."""
        import scipy.sparse as sp

        n = self.n_vertices
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        vals = np.ones(2 * len(self.edges))
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _line_views(mask: np.ndarray, axis: int):
    """Yield (prefix index tuple, 1-d line) for each line of mask along axis."""
    moved = np.moveaxis(mask, axis, -1)
    flat = moved.reshape(-1, mask.shape[axis])
    prefix_shape = moved.shape[:-1]
    for j in range(flat.shape[0]):
        yield np.unravel_index(j, prefix_shape) if prefix_shape else (), flat[j]


def _box_conductances(env: Environment, bases: np.ndarray, axes: np.ndarray) -> np.ndarray:
    if len(bases) == 0:
        return np.zeros(0)
    return kern.conductance_batch(
        env.seed, env.law.code, env.law.packed_params, bases, axes)


def restrict_to_box(env: Environment, center, radius: int,
                    max_cells: int = 50_000_000) -> FiniteGraph:
    """Open sites of the box |y - center|_inf <= radius with interior edges.

    Keeps exactly the ambient edges whose endpoints both lie in the box; a
    box never splits an edge (interior sites of an edge are closed, and a box
    is axis-convex). Degree can drop below 2*dim near the boundary or where
    an edge jumps out of the box.
    """
    center = tuple(int(c) for c in center)
    radius = int(radius)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    side = 2 * radius + 1
    ncells = side ** env.dim
    if ncells * env.dim > max_cells:
        raise ResourceLimitError(
            f"box radius {radius} in dim {env.dim} needs {ncells} cells, "
            f"budget is {max_cells // env.dim}")
    lo = np.array(center, dtype=np.int64) - radius
    mask = kern.open_mask_box(env.seed, env.p, lo, (side,) * env.dim)
    verts = np.argwhere(mask).astype(np.int64) + lo
    order = np.lexsort(verts.T[::-1])  # lexicographic by coordinates
    verts = verts[order]
    index = {tuple(v): i for i, v in enumerate(verts.tolist())}

    rec_base, rec_axis, rec_len = [], [], []
    eu, ev = [], []
    for axis in range(env.dim):
        for prefix, line in _line_views(mask, axis):
            pos = np.flatnonzero(line)
            if len(pos) < 2:
                continue
            for a, b in zip(pos[:-1], pos[1:]):
                coord = list(prefix[:axis]) + [a] + list(prefix[axis:])
                base = tuple(int(c) + int(o) for c, o in zip(coord, lo))
                head = list(base)
                head[axis] += int(b - a)
                rec_base.append(base)
                rec_axis.append(axis)
                rec_len.append(int(b - a))
                eu.append(index[base])
                ev.append(index[tuple(head)])

    bases = np.array(rec_base, dtype=np.int64).reshape(len(rec_base), env.dim)
    axes = np.array(rec_axis, dtype=np.int64)
    conds = _box_conductances(env, bases, axes)
    edges = [
        EdgeRecord(base=tuple(b), axis=int(a), length=int(n), conductance=float(c))
        for b, a, n, c in zip(rec_base, rec_axis, rec_len, conds)
    ]
    disp = np.zeros((len(edges), env.dim), dtype=np.int64)
    for i, e in enumerate(edges):
        disp[i, e.axis] = e.length
    return FiniteGraph(env, center, radius, False, verts, edges,
                       np.array(eu, dtype=np.int32), np.array(ev, dtype=np.int32),
                       disp)


def periodize(env: Environment, radius: int,
              max_cells: int = 50_000_000) -> FiniteGraph:
    """Wrap the box [-radius, radius]^d into a torus of period 2*radius+1.

    Each axis line becomes a cycle through its open sites; the wrap edge is
    keyed by its largest open coordinate (so the torus is as deterministic as
    everything else). Every open site has degree exactly 2*dim. A line with a
    single open site contributes a self-loop carrying displacement = period;
    a line with no open site raises ClosedLineError.
    """
    radius = int(radius)
    side = 2 * radius + 1
    ncells = side ** env.dim
    if ncells * env.dim > max_cells:
        raise ResourceLimitError(
            f"torus radius {radius} in dim {env.dim} needs {ncells} cells, "
            f"budget is {max_cells // env.dim}")
    lo = np.full(env.dim, -radius, dtype=np.int64)
    mask = kern.open_mask_box(env.seed, env.p, lo, (side,) * env.dim)
    verts = np.argwhere(mask).astype(np.int64) + lo
    order = np.lexsort(verts.T[::-1])
    verts = verts[order]
    index = {tuple(v): i for i, v in enumerate(verts.tolist())}

    rec_base, rec_axis, rec_len = [], [], []
    eu, ev = [], []
    disp_rows = []
    for axis in range(env.dim):
        for prefix, line in _line_views(mask, axis):
            pos = np.flatnonzero(line)
            if len(pos) == 0:
                coord = list(prefix[:axis]) + ["*"] + list(prefix[axis:])
                where = tuple(
                    "*" if c == "*" else int(c) + int(o)
                    for c, o in zip(coord, lo))
                raise ClosedLineError(
                    f"torus line {where} along axis {axis} has no open site "
                    f"(seed {env.seed}, radius {radius})")
            pairs = list(zip(pos[:-1], pos[1:]))
            for a, b in pairs:
                coord = list(prefix[:axis]) + [int(a)] + list(prefix[axis:])
                base = tuple(int(c) + int(o) for c, o in zip(coord, lo))
                head = list(base)
                head[axis] += int(b - a)
                rec_base.append(base)
                rec_axis.append(axis)
                rec_len.append(int(b - a))
                eu.append(index[base])
                ev.append(index[tuple(head)])
                d = np.zeros(env.dim, dtype=np.int64)
                d[axis] = int(b - a)
                disp_rows.append(d)
            # wrap edge: from the largest open coordinate around to the smallest
            a, b = int(pos[-1]), int(pos[0])
            coord = list(prefix[:axis]) + [a] + list(prefix[axis:])
            base = tuple(int(c) + int(o) for c, o in zip(coord, lo))
            head_coord = list(prefix[:axis]) + [b] + list(prefix[axis:])
            head = tuple(int(c) + int(o) for c, o in zip(head_coord, lo))
            length = side - (a - b)
            rec_base.append(base)
            rec_axis.append(axis)
            rec_len.append(length)
            eu.append(index[base])
            ev.append(index[head])
            d = np.zeros(env.dim, dtype=np.int64)
            d[axis] = length
            disp_rows.append(d)

    bases = np.array(rec_base, dtype=np.int64).reshape(len(rec_base), env.dim)
    axes = np.array(rec_axis, dtype=np.int64)
    conds = _box_conductances(env, bases, axes)
    edges = [
        EdgeRecord(base=tuple(b), axis=int(a), length=int(n), conductance=float(c))
        for b, a, n, c in zip(rec_base, rec_axis, rec_len, conds)
    ]
    disp = np.array(disp_rows, dtype=np.int64).reshape(len(edges), env.dim)
    return FiniteGraph(env, (0,) * env.dim, radius, True, verts, edges,
                       np.array(eu, dtype=np.int32), np.array(ev, dtype=np.int32),
                       disp)


def export_edges_csv(graph: FiniteGraph, path) -> None:
    """Write the edge list as CSV: base coordinates, axis, length, conductance.

    Row order is the deterministic construction order, floats are shortest
    round-trip reprs, so identical (env, radius) gives identical bytes.
    """
    cols = [f"base_{i}" for i in range(graph.dim)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols + ["axis", "length", "conductance"]) + "\n")
        for e in graph.edges:
            cells = [str(c) for c in e.base]
            cells += [str(e.axis), str(e.length), repr(e.conductance)]
            fh.write(",".join(cells) + "\n")
