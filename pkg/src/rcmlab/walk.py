"""Event-driven random walks among random conductances.

Two walks share the jump law P(x,y) = conductance(x,y)/total(x): the
variable-speed walk holds Exp(total(x)) at x, the constant-speed walk holds
Exp(1). Both are driven by the counter-based uniform stream, so a trajectory
is a pure function of (environment seed, run seed, walk index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .environment import Environment, FiniteGraph, neighbor_along_axis, total_rate

__all__ = [
    "Trajectory", "StepDistribution", "step_distribution",
    "simulate_vsrw", "simulate_csrw", "EnsembleResult", "walk_ensemble",
    "time_change", "rescale", "discretize", "first_holding_times",
    "GraphWalk", "simulate_on_graph",
    "save_trajectory", "load_trajectory",
]

DEFAULT_MAX_EVENTS = 50_000_000


@dataclass(frozen=True)
class Trajectory:
    """A single walk: arrival times, visited sites, and site rates.

    times[i] is the arrival time at positions[i] (times[0] = 0); the state
    is frozen at `horizon`, so the censored final holding period is not
    represented. rates[i] is the total conductance at positions[i], which
    is both the VSRW holding rate and the slope of the conductance clock.
    """

    kind: str                   # "vsrw" or "csrw"
    times: np.ndarray           # (k,) float64
    positions: np.ndarray       # (k, d) int64
    rates: np.ndarray           # (k,) float64
    horizon: float
    env: Environment
    run_seed: int
    walk_index: int
    origin: str = "simulated"   # or "time-change"

    def __post_init__(self):
        if self.kind not in ("vsrw", "csrw"):
            raise ValueError(f"unknown walk kind {self.kind!r}")
        if len(self.times) != len(self.positions) or len(self.times) != len(self.rates):
            raise ValueError("ragged trajectory arrays")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("jump times must be nondecreasing")

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def position_at(self, t) -> np.ndarray:
        """State at time(s) t in [0, horizon], right-continuous."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError("query time outside [0, horizon]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.positions[idx]

    def conductance_clock(self) -> np.ndarray:
        """A(t_i) = integral of the site rate up to each arrival time."""
        holds = np.diff(self.times)
        out = np.zeros_like(self.times)
        np.cumsum(self.rates[:-1] * holds, out=out[1:])
        return out

    def clock_at(self, t: float) -> float:
        """A(t), exact: piecewise linear with slope = current site rate."""
        if not 0 <= t <= self.horizon:
            raise ValueError("query time outside [0, horizon]")
        acc = self.conductance_clock()
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(acc[i] + self.rates[i] * (t - self.times[i]))


@dataclass(frozen=True)
class StepDistribution:
    """Jump law out of one site: neighbors, probabilities, conductances."""

    source: tuple[int, ...]
    targets: tuple[tuple[int, ...], ...]
    conductances: tuple[float, ...]
    total: float

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(c / self.total for c in self.conductances)


def step_distribution(env: Environment, x) -> StepDistribution:
    """Neighbors scanned axis-ascending, negative direction first.

    That order matches the simulator's cumulative-sum target selection, so
    the tuple here is exactly the distribution the walk draws from.
    """
    x = tuple(int(c) for c in x)
    targets = []
    conds = []
    for axis in range(env.dim):
        for sign in (-1, 1):
            rec = neighbor_along_axis(env, x, axis, sign)
            # base is the lesser endpoint, so the far endpoint depends on sign
            targets.append(rec.base if sign < 0 else rec.head)
            conds.append(rec.conductance)
    # plain left-to-right sum: bitwise the same accumulation the simulator uses
    total = sum(conds)
    return StepDistribution(source=x, targets=tuple(targets),
                            conductances=tuple(conds), total=total)


def _simulate(env: Environment, x0, horizon: float, run_seed: int,
              walk_index: int, csrw: bool, max_events: int) -> Trajectory:
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    times, positions, rates = kernels.walk_path(
        env.dim, env.seed, env.p, env.law.code, env.law.packed_params,
        env.scan_limit, run_seed, walk_index, csrw, float(horizon),
        tuple(int(c) for c in x0), max_events)
    return Trajectory(kind="csrw" if csrw else "vsrw",
                      times=np.asarray(times, dtype=np.float64),
                      positions=np.asarray(positions, dtype=np.int64),
                      rates=np.asarray(rates, dtype=np.float64),
                      horizon=float(horizon), env=env,
                      run_seed=int(run_seed), walk_index=int(walk_index))


def simulate_vsrw(env: Environment, x0, horizon: float, run_seed: int,
                  walk_index: int = 0,
                  max_events: int = DEFAULT_MAX_EVENTS) -> Trajectory:
    return _simulate(env, x0, horizon, run_seed, walk_index, False, max_events)


def simulate_csrw(env: Environment, x0, horizon: float, run_seed: int,
                  walk_index: int = 0,
                  max_events: int = DEFAULT_MAX_EVENTS) -> Trajectory:
    return _simulate(env, x0, horizon, run_seed, walk_index, True, max_events)


@dataclass(frozen=True)
class EnsembleResult:
    """Grid-sampled ensemble: positions and conductance clock per walk."""

    kind: str
    t_grid: np.ndarray          # (G,)
    positions: np.ndarray       # (n_walks, G, d) int64
    clock: np.ndarray           # (n_walks, G) float64, A(t) at grid times
    events: np.ndarray          # (n_walks,) jump counts
    env: Environment
    run_seed: int
    fresh_env_per_walk: bool

    @property
    def n_walks(self) -> int:
        return self.positions.shape[0]

    def displacements(self, grid_index: int = -1) -> np.ndarray:
        return self.positions[:, grid_index, :].astype(np.float64)

    def msd(self) -> np.ndarray:
        """Mean squared displacement |X_t|^2 averaged over walks, per grid time."""
        sq = (self.positions.astype(np.float64) ** 2).sum(axis=2)
        return sq.mean(axis=0)


def walk_ensemble(env: Environment, n_walks: int, t_grid, run_seed: int,
                  csrw: bool = False, x0=None, fresh_env_per_walk: bool = False,
                  max_events: int = DEFAULT_MAX_EVENTS) -> EnsembleResult:
    """Simulate n_walks independent walks, sampled at the given time grid.

    With fresh_env_per_walk each walk w sees environment seed env.seed + w;
    combined with walk-indexed driving noise this gives annealed sampling.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and nonempty")
    x0 = tuple([0] * env.dim) if x0 is None else tuple(int(c) for c in x0)
    positions, clock, events = kernels.walk_ensemble(
        env.dim, env.seed, env.p, env.law.code, env.law.packed_params,
        env.scan_limit, run_seed, csrw, t_grid, n_walks, x0, max_events,
        fresh_env_per_walk)
    return EnsembleResult(kind="csrw" if csrw else "vsrw", t_grid=t_grid,
                          positions=positions, clock=clock, events=events,
                          env=env, run_seed=int(run_seed),
                          fresh_env_per_walk=fresh_env_per_walk)


def time_change(traj: Trajectory) -> Trajectory:
    """Reparametrize a VSRW by its conductance clock; the result is CSRW law.

    A(t) is piecewise linear with slope rates[i] between jumps, so the jump
    times of the time-changed walk are exactly A(jump times); no quadrature.
    """
    if traj.kind != "vsrw":
        raise ValueError("time change is defined on VSRW trajectories")
    new_times = traj.conductance_clock()
    new_horizon = new_times[-1] + traj.rates[-1] * (traj.horizon - traj.times[-1])
    return replace(traj, kind="csrw", times=new_times,
                   horizon=float(new_horizon), origin="time-change")


def rescale(traj: Trajectory, eps: float, n_points: int = 101
            ) -> tuple[np.ndarray, np.ndarray]:
    """Diffusive rescaling eps * X_{t/eps^2}, sampled uniformly on [0, 1]."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if traj.horizon * eps ** 2 < 1.0 - 1e-12:
        raise ValueError(
            f"horizon {traj.horizon} too short for eps={eps} (need {eps ** -2})")
    s = np.linspace(0.0, 1.0, n_points)
    query = np.minimum(s / eps ** 2, traj.horizon)
    return s, eps * traj.position_at(query).astype(np.float64)


def discretize(traj: Trajectory, n_steps: int) -> np.ndarray:
    """Positions at integer times 0..n_steps (inclusive)."""
    if traj.horizon < n_steps:
        raise ValueError(f"horizon {traj.horizon} < {n_steps}")
    return traj.position_at(np.arange(n_steps + 1, dtype=np.float64))


def first_holding_times(env: Environment, x, n: int, run_seed: int,
                        csrw: bool = False) -> np.ndarray:
    """First holding time at x for walk indices 0..n-1.

    Uses the identical stream positions the simulator consumes (hold event
    0 of each walk), so a distributional test of these values is a test of
    the simulator's holding-time law.
    """
    x = tuple(int(c) for c in x)
    rate = 1.0 if csrw else total_rate(env, x)
    u = kernels.stream_uniforms(run_seed, np.arange(n, dtype=np.int64),
                                kernels.CH_HOLD, 0)
    return -np.log1p(-u) / rate


@dataclass(frozen=True)
class GraphWalk:
    """Walk on a finite graph, tracking lattice displacement through edges.

    On periodized graphs the vertex sequence lives on the torus while
    `displacements` accumulates the signed edge displacement vectors, i.e.
    the unfolded lattice motion.
    """

    kind: str
    times: np.ndarray           # (k,)
    vertex_indices: np.ndarray  # (k,) int64
    displacements: np.ndarray   # (k, d) int64
    rates: np.ndarray           # (k,)
    horizon: float
    run_seed: int
    walk_index: int


def simulate_on_graph(graph: FiniteGraph, start: int, horizon: float,
                      run_seed: int, walk_index: int = 0, csrw: bool = False,
                      max_events: int = DEFAULT_MAX_EVENTS) -> GraphWalk:
    """Simulate on a materialized graph (adjacency order drives the scan)."""
    indptr, indices = graph.adj_indptr, graph.adj_indices
    eids, signs = graph.adj_edge, graph.adj_sign
    cond = graph.edge_conductance
    disp = graph.edge_disp
    site_rate = graph.full_rates()
    wseed = kernels.hash_words(run_seed, (kernels.CH_WALK, walk_index))
    v = int(start)
    shift = np.zeros(graph.dim, dtype=np.int64)
    times = [0.0]
    verts = [v]
    shifts = [shift.copy()]
    rates = [float(site_rate[v])]
    t = 0.0
    k = 0
    while True:
        mu = float(site_rate[v])
        rate = 1.0 if csrw else mu
        u = kernels.u01(kernels.hash_words(wseed, (kernels.CH_HOLD, k)))
        dt = -math.log1p(-u) / rate
        if t + dt > horizon:
            break
        t += dt
        r = kernels.u01(kernels.hash_words(wseed, (kernels.CH_JUMP, k))) * mu
        csum = 0.0
        lo, hi = int(indptr[v]), int(indptr[v + 1])
        ptr = hi - 1
        for q in range(lo, hi):
            csum += cond[eids[q]]
            if r < csum:
                ptr = q
                break
        shift = shift + signs[ptr] * disp[eids[ptr]]
        v = int(indices[ptr])
        k += 1
        if k >= max_events:
            raise ValueError(f"exceeded {max_events} events")
        times.append(t)
        verts.append(v)
        shifts.append(shift.copy())
        rates.append(float(site_rate[v]))
    return GraphWalk(kind="csrw" if csrw else "vsrw",
                     times=np.asarray(times), vertex_indices=np.asarray(verts),
                     displacements=np.asarray(shifts, dtype=np.int64),
                     rates=np.asarray(rates), horizon=float(horizon),
                     run_seed=int(run_seed), walk_index=int(walk_index))


def save_trajectory(traj: Trajectory, path) -> None:
    """Columnar arrays in .npz, metadata in a .json sidecar."""
    path = Path(path)
    np.savez(path, times=traj.times, positions=traj.positions, rates=traj.rates)
    meta = {
        "kind": traj.kind, "horizon": traj.horizon, "run_seed": traj.run_seed,
        "walk_index": traj.walk_index, "origin": traj.origin,
        "environment": traj.env.to_json(),
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    npz = path if path.suffix == ".npz" else path.with_suffix(".npz")
    data = np.load(npz)
    meta = json.loads(npz.with_suffix(".json").read_text())
    return Trajectory(
        kind=meta["kind"], times=data["times"], positions=data["positions"],
        rates=data["rates"], horizon=meta["horizon"],
        env=Environment.from_json(meta["environment"]),
        run_seed=meta["run_seed"], walk_index=meta["walk_index"],
        origin=meta["origin"])
