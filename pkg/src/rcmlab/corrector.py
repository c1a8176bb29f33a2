"""Harmonic coordinates on periodized environments.

The affine map phi(x) = x is not harmonic in a disordered medium; the
corrector chi is the periodic vector field making phi + chi harmonic on the
torus. Edge increments of phi use true lattice displacements (wrap edges
carry their winding), so phi + chi is a well-defined harmonic function on
the periodic cover even though only chi lives on the torus.

Two weight conventions are supported and produce the same chi on a finite
torus (for a finite symmetric generator Q, e^{Q} h = h iff Q h = 0):

* "generator": edge weights are the conductances; sparse, cheap, default.
* time-1 kernel: weights P^{(1)}(u, y) computed on the periodic cover by
  absorbing uniformization, with certified per-row deficits. This is the
  convention the effective-diffusivity formula is stated in:
  d * sigma_v^2 = E|X_1|^2 - 2 ||grad chi||^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .environment import Environment, FiniteGraph, periodize
from .errors import SolverError, TruncationError
from .heat_kernel import uniformized_series
from .metrics import hop_distances

__all__ = [
    "CorrectorField", "solve_corrector", "harmonicity_residual",
    "dirichlet_norm", "gradient_inner",
    "TimeOneData", "time_one_table", "solve_corrector_time_one",
    "DiffusivityReport", "effective_diffusivity",
    "SublinearityRow", "sublinearity_scan",
    "MartingaleReport", "martingale_walk_check",
]

CG_RTOL = 1e-10
CG_CAP_FACTOR = 50


# ---------------------------------------------------------------------------
# generator-weight solve

def _affine_generator_image(graph: FiniteGraph,
                            edge_weights: np.ndarray) -> np.ndarray:
    """(Q phi)(u) = sum over edges at u of weight * displacement, (V, d)."""
    out = np.zeros((graph.n_vertices, graph.dim))
    contrib = edge_weights[:, None] * graph.edge_disp
    np.add.at(out, graph.edge_u, contrib)
    np.add.at(out, graph.edge_v, -contrib)
    return out


def _cg_mean_zero(lap: scipy.sparse.spmatrix, b: np.ndarray, rtol: float,
                  cap: int) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG for the singular PSD Laplacian.

    b must be orthogonal to constants (it is, for any edge-difference
    right-hand side); iterates are re-projected to mean zero periodically
    to stop kernel drift.
    """
    diag = np.asarray(lap.diagonal())
    if (diag <= 0).any():
        raise SolverError("Laplacian has nonpositive diagonal entries")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, cap + 1):
        ap = lap @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        if float(np.linalg.norm(r)) <= rtol * bnorm:
            x -= x.mean()
            return x, it
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        if it % 64 == 0:
            x -= x.mean()
    resid = float(np.linalg.norm(lap @ x - b)) / bnorm
    raise SolverError(f"CG stalled after {cap} iterations, residual {resid:.3e}")


@dataclass(frozen=True)
class CorrectorField:
    """Solved corrector with its norms under the solve's weight convention."""

    graph: FiniteGraph
    convention: str
    chi: np.ndarray             # (V, d)
    residual: float             # max |Q(phi+chi)| over vertices
    iterations: int
    dirichlet_phi: float
    dirichlet_chi: float
    dirichlet_total: float      # ||grad(phi+chi)||^2

    @property
    def pythagoras_error(self) -> float:
        """Relative error of total = phi - chi (exact orthogonal projection)."""
        want = self.dirichlet_phi - self.dirichlet_chi
        return abs(self.dirichlet_total - want) / max(self.dirichlet_phi, 1e-300)


def dirichlet_norm(graph: FiniteGraph, values: np.ndarray | None,
                   edge_weights: np.ndarray, with_affine: bool = False,
                   normalized: bool = True) -> float:
    """sum over undirected edges of weight * |increment|^2 (optionally / |V|).

    The increment across an edge is values[v] - values[u], plus the edge's
    true displacement when with_affine is set (the affine part phi).
    """
    d = graph.dim
    incr = np.zeros((graph.n_edges, d))
    if values is not None:
        vals = values.reshape(graph.n_vertices, -1)
        incr = vals[graph.edge_v] - vals[graph.edge_u]
    if with_affine:
        incr = incr + graph.edge_disp
    total = float(np.einsum("e,ed->", edge_weights, incr ** 2))
    return total / graph.n_vertices if normalized else total


def gradient_inner(graph: FiniteGraph, values_f: np.ndarray | None,
                   values_g: np.ndarray | None, edge_weights: np.ndarray,
                   affine_f: bool = False, affine_g: bool = False,
                   normalized: bool = True) -> float:
    def _incr(values, affine):
        incr = np.zeros((graph.n_edges, graph.dim))
        if values is not None:
            incr = values[graph.edge_v] - values[graph.edge_u]
        if affine:
            incr = incr + graph.edge_disp
        return incr

    total = float(np.einsum(
        "e,ed->", edge_weights, _incr(values_f, affine_f) * _incr(values_g, affine_g)))
    return total / graph.n_vertices if normalized else total


def harmonicity_residual(graph: FiniteGraph, chi: np.ndarray,
                         edge_weights: np.ndarray | None = None) -> float:
    """max over vertices of |sum_e w_e * (displacement + chi increment)|_inf."""
    w = graph.edge_conductance if edge_weights is None else edge_weights
    res = _affine_generator_image(graph, w).copy()
    incr = w[:, None] * (chi[graph.edge_v] - chi[graph.edge_u])
    np.add.at(res, graph.edge_u, incr)
    np.add.at(res, graph.edge_v, -incr)
    return float(np.abs(res).max())


def solve_corrector(graph: FiniteGraph, edge_weights: np.ndarray | None = None,
                    rtol: float = CG_RTOL) -> CorrectorField:
    """Solve L chi = -L phi per coordinate under generator-type weights."""
    if graph.n_vertices == 0:
        raise ValueError("empty graph")
    hops = hop_distances(graph, 0)
    if (hops < 0).any():
        raise SolverError("torus is disconnected")
    w = graph.edge_conductance if edge_weights is None else np.asarray(edge_weights, float)
    if (w <= 0).any():
        raise ValueError("edge weights must be positive")
    lap = graph.laplacian(w)
    qphi = _affine_generator_image(graph, w)
    chi = np.zeros((graph.n_vertices, graph.dim))
    iters = 0
    cap = CG_CAP_FACTOR * graph.n_vertices
    for a in range(graph.dim):
        chi[:, a], it = _cg_mean_zero(lap, qphi[:, a], rtol, cap)
        iters = max(iters, it)
    return CorrectorField(
        graph=graph, convention="generator", chi=chi,
        residual=harmonicity_residual(graph, chi, w), iterations=iters,
        dirichlet_phi=dirichlet_norm(graph, None, w, with_affine=True),
        dirichlet_chi=dirichlet_norm(graph, chi, w),
        dirichlet_total=dirichlet_norm(graph, chi, w, with_affine=True))


# ---------------------------------------------------------------------------
# time-1 kernel weights on the periodic cover

@dataclass(frozen=True)
class TimeOneData:
    """Sparse table of P^{(1)}(u, y) over the periodic cover.

    One row per (source torus vertex, cover target): `dst` is the target
    folded back to the torus, `disp` the true lattice displacement. Row
    deficits (absorbed + pruned mass) are certified upper bounds on the
    missing probability.
    """

    src: np.ndarray         # (M,) int32
    dst: np.ndarray         # (M,) int32
    disp: np.ndarray        # (M, d) int64
    prob: np.ndarray        # (M,)
    deficit: np.ndarray     # (V,)
    n_vertices: int
    t: float = 1.0

    def mean_square_displacement(self) -> float:
        """E|X_t|^2 averaged over starting vertices."""
        return float((self.prob * (self.disp.astype(float) ** 2).sum(axis=1)).sum()
                     / self.n_vertices)

    def dirichlet(self, chi: np.ndarray | None, with_affine: bool) -> float:
        """(1/2|V|) sum_u sum_y P(u,y) |increment|^2."""
        incr = np.zeros((len(self.prob), self.disp.shape[1]))
        if chi is not None:
            incr = chi[self.dst] - chi[self.src]
        if with_affine:
            incr = incr + self.disp
        return float(np.einsum("m,md->", self.prob, incr ** 2)) / (2 * self.n_vertices)

    def residual(self, chi: np.ndarray) -> float:
        """max_u |sum_y P(u,y) ((y-u) + chi increment)|, the time-1 version
        of harmonicity (zero iff phi+chi is fixed by the kernel up to
        deficit-sized truncation error)."""
        incr = self.disp.astype(float) + chi[self.dst] - chi[self.src]
        out = np.zeros((self.n_vertices, self.disp.shape[1]))
        np.add.at(out, self.src, self.prob[:, None] * incr)
        return float(np.abs(out).max())

    def folded_matrix(self) -> np.ndarray:
        f = np.zeros((self.n_vertices, self.n_vertices))
        np.add.at(f, (self.src, self.dst), self.prob)
        return f


def _cover_margin(graph: FiniteGraph) -> int:
    return int(np.abs(graph.edge_disp).max(initial=1))


def time_one_table(graph: FiniteGraph, deficit_target: float = 1e-9,
                   prune: float = 1e-15, t: float = 1.0,
                   max_margin: int = 4096) -> TimeOneData:
    """Time-t kernel rows for every torus vertex, on the periodic cover.

    The cover box is the fundamental cell padded by an adaptive margin;
    absorbing uniformization there certifies each row's deficit, and the
    margin grows until every deficit is below target.
    """
    if not graph.periodic:
        raise ValueError("time-one weights are defined on periodized graphs")
    period = graph.period
    r = graph.radius
    side = 2 * r + 1
    cell = graph.vertices                      # (V, d) coords in [-r, r]^d
    v_count = graph.n_vertices
    d = graph.dim
    rates = graph.graph_rates                  # ambient periodic mu(x)
    lmax = _cover_margin(graph)
    margin = max(4 * lmax, 8)

    while True:
        box_radius = r + margin
        # enumerate cover vertices: every cell translate hitting the box
        kmax = (box_radius + r) // side + 1
        shifts = np.array(np.meshgrid(
            *[np.arange(-kmax, kmax + 1)] * d, indexing="ij")).reshape(d, -1).T
        pts = (cell[None, :, :] + side * shifts[:, None, :]).reshape(-1, d)
        owner = np.tile(np.arange(v_count), len(shifts))
        inside = (np.abs(pts) <= box_radius).all(axis=1)
        pts, owner = pts[inside], owner[inside]
        order = np.lexsort(tuple(pts[:, a] for a in range(d - 1, -1, -1)))
        pts, owner = pts[order], owner[order]
        index = {tuple(q): i for i, q in enumerate(pts.tolist())}
        n_cover = len(pts)

        rows, cols, vals = [], [], []
        for e in range(graph.n_edges):
            u = graph.edge_u[e]
            base = cell[u]
            dvec = graph.edge_disp[e]
            c = graph.edge_conductance[e]
            for k in range(len(shifts)):
                x = tuple((base + side * shifts[k]).tolist())
                i = index.get(x)
                if i is None:
                    continue
                y = tuple((np.asarray(x) + dvec).tolist())
                j = index.get(y)
                if j is None:
                    continue
                rows.append(i); cols.append(j); vals.append(c)
                rows.append(j); cols.append(i); vals.append(c)
        w = scipy.sparse.coo_matrix(
            (vals, (rows, cols)), shape=(n_cover, n_cover)).tocsr()
        diag = rates[owner]

        sources = np.flatnonzero((np.abs(pts) <= r).all(axis=1))
        assert len(sources) == v_count
        v0 = np.zeros((n_cover, v_count))
        src_vertex = np.empty(v_count, dtype=np.int64)
        for col, i in enumerate(sources):
            v0[i, col] = 1.0
            src_vertex[col] = owner[i]
        kern, _ = uniformized_series(w, diag, t, v0, tolerance=deficit_target / 10)

        deficit = 1.0 - kern.sum(axis=0)
        if deficit.max() <= deficit_target or margin >= max_margin:
            break
        margin *= 2
    if deficit.max() > deficit_target:
        raise TruncationError(
            f"cover margin {margin} leaves deficit {deficit.max():.3e}")

    src_l, dst_l, disp_l, prob_l = [], [], [], []
    pruned = np.zeros(v_count)
    for col in range(v_count):
        vertex = int(src_vertex[col])
        pcol = kern[:, col]
        keep = pcol > prune
        pruned[vertex] += float(pcol[~keep].sum())
        idxs = np.flatnonzero(keep)
        src_l.append(np.full(len(idxs), vertex, dtype=np.int32))
        dst_l.append(owner[idxs].astype(np.int32))
        disp_l.append(pts[idxs] - cell[vertex])
        prob_l.append(pcol[idxs])
    order_vertex = np.argsort(src_vertex, kind="stable")
    src = np.concatenate([src_l[i] for i in order_vertex])
    dst = np.concatenate([dst_l[i] for i in order_vertex])
    disp = np.concatenate([disp_l[i] for i in order_vertex])
    prob = np.concatenate([prob_l[i] for i in order_vertex])
    deficit_by_vertex = np.zeros(v_count)
    deficit_by_vertex[src_vertex] = deficit
    return TimeOneData(src=src, dst=dst, disp=disp, prob=prob,
                       deficit=deficit_by_vertex + pruned,
                       n_vertices=v_count, t=t)


def solve_corrector_time_one(table: TimeOneData) -> np.ndarray:
    """chi from the folded time-1 kernel: (I - P) chi = sum_y P(u,y)(y-u).

    Dense least-squares with a mean-zero gauge; intended for the cross-solve
    agreement check against the generator-weight corrector.
    """
    v = table.n_vertices
    d = table.disp.shape[1]
    f = table.folded_matrix()
    a = np.diag(f.sum(axis=1)) - f
    b = np.zeros((v, d))
    np.add.at(b, table.src, table.prob[:, None] * table.disp)
    # gauge: append the mean-zero constraint row
    aug = np.vstack([a, np.ones((1, v))])
    rhs = np.vstack([b, np.zeros((1, d))])
    chi, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    return chi - chi.mean(axis=0)


# ---------------------------------------------------------------------------
# effective diffusivity

@dataclass(frozen=True)
class DiffusivityReport:
    radius: int
    n_vertices: int
    sigma_v_sq: float
    mean_square_step: float        # E|X_1|^2 averaged over starting vertices
    dirichlet_chi: float           # time-1 convention
    dirichlet_phi: float
    dirichlet_total: float
    pythagoras_error: float
    residual_generator: float
    residual_time_one: float
    deficit_max: float
    cg_iterations: int


def effective_diffusivity(env: Environment, radius: int,
                          rtol: float = CG_RTOL,
                          deficit_target: float = 1e-9) -> DiffusivityReport:
    """sigma_v^2 on one periodized box: (E|X_1|^2 - 2||grad chi||^2) / d.

    chi is solved cheaply under generator weights; the norms entering the
    formula use the time-1 kernel convention (the two conventions share the
    same chi on a finite torus).
    """
    g = periodize(env, radius)
    field = solve_corrector(g, rtol=rtol)
    table = time_one_table(g, deficit_target=deficit_target)
    exq = table.mean_square_displacement()
    dchi = table.dirichlet(field.chi, with_affine=False)
    dphi = table.dirichlet(None, with_affine=True)
    dtot = table.dirichlet(field.chi, with_affine=True)
    sigma = (exq - 2.0 * dchi) / env.dim
    pyth = abs(dtot - (dphi - dchi)) / max(dphi, 1e-300)
    return DiffusivityReport(
        radius=radius, n_vertices=g.n_vertices, sigma_v_sq=sigma,
        mean_square_step=exq, dirichlet_chi=dchi, dirichlet_phi=dphi,
        dirichlet_total=dtot, pythagoras_error=pyth,
        residual_generator=field.residual,
        residual_time_one=table.residual(field.chi),
        deficit_max=float(table.deficit.max()),
        cg_iterations=field.iterations)


# ---------------------------------------------------------------------------
# sublinearity and martingale diagnostics

@dataclass(frozen=True)
class SublinearityRow:
    radius: int
    n_vertices: int
    max_ratio: float                      # max |chi|_inf / radius
    densities: tuple[float, ...]          # fraction with |chi|_inf >= eps * n
    axis_max_ratio: float                 # max over first-axis sites of |chi|/|x1|


def sublinearity_scan(env: Environment, radii,
                      epsilons=(0.05, 0.1, 0.2),
                      rtol: float = CG_RTOL) -> list[SublinearityRow]:
    rows = []
    for n in sorted(radii):
        g = periodize(env, int(n))
        chi = solve_corrector(g, rtol=rtol).chi
        sup = np.abs(chi).max(axis=1)
        dens = tuple(float((sup >= eps * n).mean()) for eps in epsilons)
        on_axis = (g.vertices[:, 1:] == 0).all(axis=1) & (g.vertices[:, 0] != 0)
        if on_axis.any():
            axis_ratio = float((sup[on_axis]
                                / np.abs(g.vertices[on_axis, 0])).max())
        else:
            axis_ratio = math.nan
        rows.append(SublinearityRow(
            radius=int(n), n_vertices=g.n_vertices,
            max_ratio=float(sup.max() / n), densities=dens,
            axis_max_ratio=axis_ratio))
    return rows


@dataclass(frozen=True)
class MartingaleReport:
    """Conditional-increment test of M_n = X_n + chi(X_n) at integer times."""

    n_sites_tested: int
    coverage: float                # fraction of increments at tested sites
    max_abs_z: float
    worst_site: tuple[int, ...] | None
    n_increments: int


def martingale_walk_check(graph: FiniteGraph, chi: np.ndarray, n_walks: int,
                          n_steps: int, run_seed: int,
                          min_visits: int = 50) -> MartingaleReport:
    """Empirical E[M_{n+1} - M_n | X_n = x] vs 0, per sufficiently-visited x.

    Walks run on the torus with displacement bookkeeping; the compensated
    position M uses the solved chi at the folded vertex. z-scores are per
    site and coordinate, mean / (sd/sqrt(count)).
    """
    from .walk import simulate_on_graph
    d = graph.dim
    sums: dict[int, np.ndarray] = {}
    sqs: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    total = 0
    for wi in range(n_walks):
        gw = simulate_on_graph(graph, 0, float(n_steps), run_seed,
                               walk_index=wi)
        grid = np.arange(n_steps + 1, dtype=np.float64)
        at = np.searchsorted(gw.times, grid, side="right") - 1
        verts = gw.vertex_indices[at]
        disp = gw.displacements[at]
        m = disp + chi[verts]
        inc = np.diff(m, axis=0)
        for j in range(n_steps):
            v = int(verts[j])
            if v not in sums:
                sums[v] = np.zeros(d)
                sqs[v] = np.zeros(d)
                counts[v] = 0
            sums[v] += inc[j]
            sqs[v] += inc[j] ** 2
            counts[v] += 1
            total += 1
    max_z = 0.0
    worst = None
    tested = 0
    covered = 0
    for v, cnt in counts.items():
        if cnt < min_visits:
            continue
        tested += 1
        covered += cnt
        mean = sums[v] / cnt
        var = sqs[v] / cnt - mean ** 2
        se = np.sqrt(np.maximum(var, 1e-300) / cnt)
        z = float(np.abs(mean / se).max())
        if z > max_z:
            max_z = z
            worst = tuple(int(c) for c in graph.vertices[v])
    return MartingaleReport(n_sites_tested=tested,
                            coverage=covered / max(total, 1),
                            max_abs_z=max_z, worst_site=worst,
                            n_increments=total)
