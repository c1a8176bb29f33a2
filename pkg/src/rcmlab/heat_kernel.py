"""Transition kernels of the variable-speed walk, exact and Monte Carlo.

Exact kernels on finite graphs come from uniformization: with Lambda an
upper bound on the jump rates, e^{tQ} = sum_k Pois(Lambda t; k) S^k where
S = I + Q/Lambda is substochastic. The Poisson tail beyond the step cap is
a certified per-entry truncation bound. Two boundary conventions:

* "closed": the generator uses only in-graph edges; mass is conserved. On a
  periodized graph this is the exact torus kernel.
* "absorbing": the diagonal carries the ambient (infinite-graph) rate, so
  mass leaks at the box boundary and every entry is a certified lower bound
  on the infinite-volume kernel; the row deficit is the absorbed mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy.stats import poisson

from .environment import Environment, FiniteGraph
from .errors import TruncationError
from .walk import walk_ensemble

__all__ = [
    "KernelEstimate", "uniformized_series", "kernel_uniformization", "kernel_matrix",
    "kernel_monte_carlo", "torus_occupancy", "kernel_monte_carlo_graph",
    "classify_regime", "regime_entries", "RegimeFit",
    "fit_uniform_constant", "fit_gaussian_upper", "fit_exponential_upper",
    "fit_near_diagonal_lower", "KernelProbeConfig", "regularity_radius",
]

DEFAULT_TOLERANCE = 1e-12
STEP_CAP = 200_000


@dataclass(frozen=True)
class KernelEstimate:
    """One kernel row: P^{(t)}(source, target) for each listed target."""

    t: float
    source: tuple[int, ...]
    targets: np.ndarray         # (k, d) lattice points
    probabilities: np.ndarray   # (k,)
    method: str                 # "uniformization" or "monte-carlo"
    error_bound: float          # truncation tail (exact) or 1/sqrt(N) scale (MC)
    deficit: float              # 1 - sum(probabilities)
    n_samples: int = 0          # MC only

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(t): float(p)
                for t, p in zip(self.targets.tolist(), self.probabilities)}

    def prob(self, y) -> float:
        y = np.asarray(y, dtype=np.int64)
        hit = np.flatnonzero((self.targets == y).all(axis=1))
        return float(self.probabilities[hit[0]]) if len(hit) else 0.0

    def stderr(self) -> np.ndarray:
        """Binomial standard errors; zero for exact kernels."""
        if self.method != "monte-carlo":
            return np.zeros_like(self.probabilities)
        p = self.probabilities
        return np.sqrt(p * (1 - p) / self.n_samples)


def _poisson_cap(mu: float, tolerance: float, step_cap: int) -> int:
    if mu == 0.0:
        return 0
    k = max(0, int(poisson.isf(tolerance, mu)))
    while poisson.sf(k, mu) > tolerance and k <= step_cap:
        k += 1
    if k > step_cap:
        raise TruncationError(
            f"uniformization needs more than {step_cap} steps "
            f"(Lambda*t = {mu:.3g}, tolerance {tolerance:g})")
    return k


def _weighted_adjacency(graph: FiniteGraph) -> scipy.sparse.csr_matrix:
    n = graph.n_vertices
    u, v, c = graph.edge_u, graph.edge_v, graph.edge_conductance
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    vals = np.concatenate([c, c])
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def uniformized_series(weights_csr: scipy.sparse.spmatrix, diag: np.ndarray,
                       t: float, v0: np.ndarray,
                       tolerance: float = DEFAULT_TOLERANCE,
                       step_cap: int = STEP_CAP) -> tuple[np.ndarray, float]:
    """e^{t(W - diag)} @ v0 via the Poisson mixture, plus the tail bound.

    W must be symmetric nonnegative with row sums <= diag entrywise (equality
    means conservation). v0 may be a vector or a matrix of columns.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    lam = float(diag.max(initial=0.0))
    if lam == 0.0 or t == 0.0:
        return v0.copy(), 0.0
    # S = I - diag/lam + W/lam, entrywise nonnegative
    s_mat = (weights_csr / lam + scipy.sparse.diags(1.0 - diag / lam)).tocsr()
    cap = _poisson_cap(lam * t, tolerance, step_cap)
    pois = poisson.pmf(np.arange(cap + 1), lam * t)
    out = np.zeros_like(v0, dtype=np.float64)
    vk = v0.astype(np.float64, copy=True)
    for k in range(cap + 1):
        out += pois[k] * vk
        if k < cap:
            vk = s_mat @ vk
    return out, float(poisson.sf(cap, lam * t))


def _uniformized_apply(graph: FiniteGraph, v0: np.ndarray, t: float,
                       tolerance: float, boundary: str, step_cap: int
                       ) -> tuple[np.ndarray, float]:
    if boundary not in ("closed", "absorbing"):
        raise ValueError(f"unknown boundary {boundary!r}")
    diag = graph.graph_rates if boundary == "closed" else graph.full_rates()
    return uniformized_series(_weighted_adjacency(graph), diag, t, v0,
                              tolerance, step_cap)


def kernel_uniformization(graph: FiniteGraph, x, t: float,
                          tolerance: float = DEFAULT_TOLERANCE,
                          boundary: str = "closed",
                          step_cap: int = STEP_CAP) -> KernelEstimate:
    """Exact kernel row from x, truncated with a certified error bound."""
    x = tuple(int(c) for c in x)
    src = graph.index[x]
    v0 = np.zeros(graph.n_vertices)
    v0[src] = 1.0
    # Q is symmetric, so propagating the indicator gives the row
    row, tail = _uniformized_apply(graph, v0, t, tolerance, boundary, step_cap)
    return KernelEstimate(t=float(t), source=x, targets=graph.vertices,
                          probabilities=row, method="uniformization",
                          error_bound=tail, deficit=float(1.0 - row.sum()))


def kernel_matrix(graph: FiniteGraph, t: float,
                  tolerance: float = DEFAULT_TOLERANCE,
                  boundary: str = "closed",
                  step_cap: int = STEP_CAP) -> np.ndarray:
    """Full e^{tQ} (dense); intended for small graphs and cross-checks."""
    eye = np.eye(graph.n_vertices)
    out, _ = _uniformized_apply(graph, eye, t, tolerance, boundary, step_cap)
    return out


def kernel_monte_carlo(env: Environment, x, t: float, n_walks: int,
                       run_seed: int) -> KernelEstimate:
    """Empirical law of the VSRW at time t on the infinite lattice."""
    if t == 0.0:
        return KernelEstimate(t=0.0, source=tuple(int(c) for c in x),
                              targets=np.asarray([x], dtype=np.int64),
                              probabilities=np.array([1.0]),
                              method="monte-carlo", error_bound=0.0,
                              deficit=0.0, n_samples=n_walks)
    ens = walk_ensemble(env, n_walks, [t], run_seed, csrw=False, x0=x)
    finals = ens.positions[:, -1, :]
    targets, counts = np.unique(finals, axis=0, return_counts=True)
    probs = counts / n_walks
    return KernelEstimate(t=float(t), source=tuple(int(c) for c in x),
                          targets=targets, probabilities=probs,
                          method="monte-carlo",
                          error_bound=float(1.0 / math.sqrt(n_walks)),
                          deficit=0.0, n_samples=n_walks)


def torus_occupancy(graph: FiniteGraph, start: int, t: float, n_walks: int,
                    run_seed: int, csrw: bool = False) -> np.ndarray:
    """Counts of the walk's position at time t over n_walks runs.

    Same event stream as walk.simulate_on_graph, but only the final vertex
    is kept, so large ensembles stay cheap.
    """
    from . import _kernels as kernels
    indptr, indices = graph.adj_indptr, graph.adj_indices
    eids = graph.adj_edge
    cond = graph.edge_conductance
    site_rate = graph.full_rates()
    counts = np.zeros(graph.n_vertices, dtype=np.int64)
    for w in range(n_walks):
        wseed = kernels.hash_words(run_seed, (kernels.CH_WALK, w))
        v = int(start)
        tt = 0.0
        k = 0
        while True:
            mu = float(site_rate[v])
            rate = 1.0 if csrw else mu
            u = kernels.u01(kernels.hash_words(wseed, (kernels.CH_HOLD, k)))
            dt = -math.log1p(-u) / rate
            if tt + dt > t:
                break
            tt += dt
            r = kernels.u01(kernels.hash_words(wseed, (kernels.CH_JUMP, k))) * mu
            csum = 0.0
            lo, hi = int(indptr[v]), int(indptr[v + 1])
            ptr = hi - 1
            for q in range(lo, hi):
                csum += cond[eids[q]]
                if r < csum:
                    ptr = q
                    break
            v = int(indices[ptr])
            k += 1
        counts[v] += 1
    return counts


def kernel_monte_carlo_graph(graph: FiniteGraph, x, t: float, n_walks: int,
                             run_seed: int) -> KernelEstimate:
    x = tuple(int(c) for c in x)
    counts = torus_occupancy(graph, graph.index[x], t, n_walks, run_seed)
    return KernelEstimate(t=float(t), source=x, targets=graph.vertices,
                          probabilities=counts / n_walks,
                          method="monte-carlo",
                          error_bound=float(1.0 / math.sqrt(n_walks)),
                          deficit=0.0, n_samples=n_walks)


# ---------------------------------------------------------------------------
# regime classification and envelope fits

def classify_regime(dx_inf: float, t: float, crossover: float = 1.0) -> str:
    """near-diagonal when |dx| <= sqrt(t); otherwise split at t = c * |dx|."""
    if dx_inf <= math.sqrt(t):
        return "near-diagonal"
    return "gaussian" if t >= crossover * dx_inf else "exponential"


def regime_entries(est: KernelEstimate, crossover: float = 1.0
                   ) -> list[tuple[tuple[int, ...], int, float, float, str]]:
    """(target, |dx|_inf, t, p, regime) per kernel entry."""
    src = np.asarray(est.source, dtype=np.int64)
    dx = np.abs(est.targets - src).max(axis=1)
    out = []
    for y, dxi, p in zip(est.targets.tolist(), dx.tolist(), est.probabilities):
        out.append((tuple(y), int(dxi), est.t, float(p),
                    classify_regime(dxi, est.t, crossover)))
    return out


@dataclass(frozen=True)
class RegimeFit:
    """Envelope fit p <= scale * shape(u): slope from least squares on the
    positive entries, intercept raised until every entry is dominated."""

    regime: str
    c_scale: float      # multiplicative constant (c4-like)
    c_rate: float       # exponential rate (c5-like)
    n_entries: int
    slack: np.ndarray = field(repr=False)   # log(bound) - log(p) per entry

    def required_scale(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.exp(y + self.c_rate * u)


def _envelope_fit(u: np.ndarray, y: np.ndarray, regime: str) -> RegimeFit:
    """y <= log(c_scale) - c_rate * u for all entries, c_rate >= 0."""
    if len(u) < 2:
        raise ValueError("need at least two entries to fit")
    slope, intercept = np.polyfit(u, y, 1)
    rate = max(0.0, -float(slope))
    log_scale = float(np.max(y + rate * u))
    slack = log_scale - rate * u - y
    return RegimeFit(regime=regime, c_scale=math.exp(log_scale), c_rate=rate,
                     n_entries=len(u), slack=slack)


def fit_uniform_constant(estimates, d: int, t_min: float = 1.0
                         ) -> tuple[float, list[tuple[float, float, float]]]:
    """Smallest c with p <= c * t^{-d/2} over all entries with t >= t_min.

    Also returns per-estimate rows (t, sup_p, sup_p * t^{d/2}); stability
    of the last column across t is the interesting diagnostic.
    """
    rows = []
    c3 = 0.0
    for est in estimates:
        sup_p = float(est.probabilities.max())
        scaled = sup_p * est.t ** (d / 2)
        rows.append((est.t, sup_p, scaled))
        if est.t >= t_min:
            c3 = max(c3, scaled)
    if c3 == 0.0:
        raise ValueError(f"no estimates with t >= {t_min}")
    return c3, rows


def fit_gaussian_upper(entries, d: int) -> RegimeFit:
    """Envelope for p <= c4 t^{-d/2} exp(-c5 |dx|^2 / t) on gaussian entries."""
    us, ys = [], []
    for _, dx, t, p, regime in entries:
        if regime == "gaussian" and p > 0:
            us.append(dx * dx / t)
            ys.append(math.log(p) + (d / 2) * math.log(t))
    return _envelope_fit(np.array(us), np.array(ys), "gaussian")


def fit_exponential_upper(entries) -> RegimeFit:
    """Envelope for p <= c4 exp(-c5 |dx| (1 v log(|dx|/t)))."""
    us, ys = [], []
    for _, dx, t, p, regime in entries:
        if regime == "exponential" and p > 0:
            us.append(dx * max(1.0, math.log(dx / t)))
            ys.append(math.log(p))
    return _envelope_fit(np.array(us), np.array(ys), "exponential")


def fit_near_diagonal_lower(estimates, hop_distances_by_est, d: int,
                            gate: float = 0.5) -> tuple[float, int]:
    """Largest c8 with p >= c8 t^{-d/2} over probes with d_graph <= gate*sqrt(t).

    hop_distances_by_est[i][j] is the graph distance from the source of
    estimates[i] to its j-th target. Probes failing the gate are skipped.
    """
    c8 = math.inf
    used = 0
    for est, hops in zip(estimates, hop_distances_by_est):
        sel = np.asarray(hops) <= gate * math.sqrt(est.t)
        if not sel.any():
            continue
        used += int(sel.sum())
        c8 = min(c8, float((est.probabilities[sel] * est.t ** (d / 2)).min()))
    if used == 0:
        raise ValueError("no probes satisfy the near-diagonal gate")
    return c8, used


# ---------------------------------------------------------------------------
# kernel regularity radius

@dataclass(frozen=True)
class KernelProbeConfig:
    """Versioned probe grid for regime fits and the regularity radius."""

    t_values: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    n_max: int = 12
    working_radius: int = 64
    crossover: float = 1.0
    slack_factor: float = 4.0
    tolerance: float = 1e-10
    version: int = 1


def regularity_radius(env: Environment, x, config: KernelProbeConfig,
                      reference: dict[str, RegimeFit],
                      periodize_fn=None) -> tuple[int, bool, int]:
    """Smallest radius beyond which fitted upper bounds hold at x.

    Checks every off-diagonal probe (|y-x|_inf in [1, n_max], t in the probe
    grid, gaussian or exponential regime) against `reference` bounds scaled
    by config.slack_factor. Returns (radius, censored, violation count):
    radius = 1 + the largest violating |y-x|_inf (minimum 1), censored when
    the largest probed radius still violates.
    """
    from .environment import periodize
    build = periodize_fn or periodize
    x = tuple(int(c) for c in x)
    g = build(env, config.working_radius)
    if x not in g.index:
        raise ValueError(f"{x} is not an open site")
    d = env.dim
    worst = 0
    violations = 0
    for t in config.t_values:
        est = kernel_uniformization(g, x, t, config.tolerance)
        for _, dx, tt, p, regime in regime_entries(est, config.crossover):
            if dx < 1 or dx > config.n_max or p <= 0:
                continue
            if regime == "gaussian":
                fit = reference["gaussian"]
                bound = (fit.c_scale * tt ** (-d / 2)
                         * math.exp(-fit.c_rate * dx * dx / tt))
            elif regime == "exponential":
                fit = reference["exponential"]
                bound = fit.c_scale * math.exp(
                    -fit.c_rate * dx * max(1.0, math.log(dx / tt)))
            else:
                continue
            if p > config.slack_factor * bound:
                violations += 1
                worst = max(worst, dx)
    value = max(1, worst + 1)
    censored = worst >= config.n_max
    return value, censored, violations
