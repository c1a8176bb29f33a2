"""Pure-Python reference kernels.

The functions here define the package's sampling semantics. A subset has a
compiled twin in ``_ckern`` (see ``_kernels/__init__``); twinned functions
must produce bit-identical output, which constrains how they are written:

* all randomness is a pure function of integer keys through a splitmix64
  finalizer chain, evaluated with plain (masked) Python ints in scalar code
  and wrapping uint64 numpy ops in batch code -- both are exact;
* float transforms (exponential and Pareto inversion) go through libm
  (math.pow / math.log1p) one value at a time, never through numpy ufuncs
  whose SIMD paths could differ by an ulp from libm;
* every float accumulation (total jump rates, cumulative jump selection,
  dependency sums in the congestion pass) runs in one fixed order.

Keys never collide across purposes because every draw folds in a channel tag.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ResourceLimitError, ScanLimitError

MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53

# Channel tags. Arbitrary fixed odd bytes; changing any of them changes every
# sample drawn by the package, so they are part of the on-disk format.
CH_SITE = 0xA5
CH_EDGE = 0xB7
CH_WALK = 0xC9
CH_HOLD = 0xD1
CH_JUMP = 0xE3

# Conductance law codes shared with the compiled backend.
LAW_CONSTANT = 0
LAW_PARETO = 1
LAW_SHIFTED_EXPONENTIAL = 2
LAW_TWO_POINT = 3

BACKEND_NAME = "python"


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_words(seed: int, words) -> int:
    """Chain-hash a key: h = mix(seed); h = mix(h ^ w) for each word."""
    h = mix64(seed & MASK64)
    for w in words:
        h = mix64(h ^ (w & MASK64))
    return h


def u01(h: int) -> float:
    """Map a 64-bit hash to a uniform double in [0, 1)."""
    return (h >> 11) * _INV_2_53


def site_open(seed: int, p: float, coords) -> bool:
    h = mix64(seed & MASK64)
    h = mix64(h ^ CH_SITE)
    for c in coords:
        h = mix64(h ^ (c & MASK64))
    return (h >> 11) * _INV_2_53 < p


def law_transform(u: float, law_kind: int, law_params) -> float:
    """Inverse-CDF transform of a uniform draw for the supported laws.

    All laws are supported on [1, inf). two_point convention: value hi with
    probability p_hi (params are (lo, hi, p_hi)).
    """
    if law_kind == LAW_CONSTANT:
        return law_params[0]
    if law_kind == LAW_PARETO:
        return math.pow(1.0 - u, -1.0 / law_params[0])
    if law_kind == LAW_SHIFTED_EXPONENTIAL:
        return 1.0 + (-math.log1p(-u)) / law_params[0]
    if law_kind == LAW_TWO_POINT:
        return law_params[1] if u < law_params[2] else law_params[0]
    raise ValueError(f"unknown law kind {law_kind}")


def edge_uniform(seed: int, axis: int, base) -> float:
    h = mix64(seed & MASK64)
    h = mix64(h ^ CH_EDGE)
    h = mix64(h ^ (axis & MASK64))
    for c in base:
        h = mix64(h ^ (c & MASK64))
    return (h >> 11) * _INV_2_53


def conductance_scalar(seed: int, law_kind: int, law_params, base, axis: int) -> float:
    return law_transform(edge_uniform(seed, axis, base), law_kind, law_params)


# ---------------------------------------------------------------------------
# Batch hashing (numpy; exact, not twinned in C)

def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _chain_vec(h, words_columns) -> np.ndarray:
    """Vectorized hash chain; h is a scalar uint64 start, columns are int64."""
    out = None
    for col in words_columns:
        w = np.ascontiguousarray(col, dtype=np.int64).view(np.uint64)
        if out is None:
            out = _mix64_vec(np.uint64(h) ^ w)
        else:
            out = _mix64_vec(out ^ w)
    return out


def site_uniforms(seed: int, coords: np.ndarray) -> np.ndarray:
    """Uniform deviates for an (N, d) int64 array of site coordinates."""
    coords = np.ascontiguousarray(coords, dtype=np.int64)
    h = mix64(mix64(seed & MASK64) ^ CH_SITE)
    out = _chain_vec(h, [coords[:, j] for j in range(coords.shape[1])])
    return (out >> np.uint64(11)).astype(np.float64) * _INV_2_53


def open_mask_box(seed: int, p: float, lo, shape, max_cells: int = 80_000_000) -> np.ndarray:
    """Boolean openness mask over the box lo + [0, shape), C-order, shape-d.

    Matches site_open exactly for every cell.
    """
    shape = tuple(int(s) for s in shape)
    ncells = int(np.prod(shape, dtype=np.int64))
    if ncells > max_cells:
        raise ResourceLimitError(
            f"box with {ncells} cells exceeds the {max_cells}-cell budget")
    d = len(shape)
    grids = np.indices(shape).reshape(d, -1)
    coords = grids.T + np.asarray(lo, dtype=np.int64)
    u = site_uniforms(seed, coords)
    return (u < p).reshape(shape)


def edge_uniforms(seed: int, axes: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """Uniform deviates for edges keyed by (axis, base coords)."""
    bases = np.ascontiguousarray(bases, dtype=np.int64)
    axes = np.ascontiguousarray(axes, dtype=np.int64)
    h = mix64(mix64(seed & MASK64) ^ CH_EDGE)
    cols = [axes] + [bases[:, j] for j in range(bases.shape[1])]
    out = _chain_vec(h, cols)
    return (out >> np.uint64(11)).astype(np.float64) * _INV_2_53


def conductance_batch(seed: int, law_kind: int, law_params,
                      bases: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Conductances for an edge batch.

    The transform runs element-wise through libm so the values agree bitwise
    with conductance_scalar (numpy's vectorized pow may not).
    """
    u = edge_uniforms(seed, axes, bases)
    if law_kind == LAW_CONSTANT:
        return np.full(u.shape, law_params[0])
    if law_kind == LAW_TWO_POINT:
        lo, hi, p_hi = law_params[0], law_params[1], law_params[2]
        return np.where(u < p_hi, hi, lo)
    return np.array([law_transform(x, law_kind, law_params) for x in u])


def stream_uniforms(run_seed: int, walk_indices: np.ndarray,
                    channel: int, event_index: int) -> np.ndarray:
    """Per-walk event-stream uniforms, identical to the simulator's draws.

    walk_seed = hash(run_seed, [CH_WALK, i]); u = u01(hash(walk_seed,
    [channel, event_index])). Vectorized over walk indices.
    """
    idx = np.ascontiguousarray(walk_indices, dtype=np.int64)
    h0 = mix64(mix64(run_seed & MASK64) ^ CH_WALK)
    wseeds = _mix64_vec(np.uint64(h0) ^ idx.view(np.uint64))
    h1 = _mix64_vec(_mix64_vec(wseeds) ^ np.uint64(channel & MASK64))
    out = _mix64_vec(h1 ^ np.uint64(event_index & MASK64))
    return (out >> np.uint64(11)).astype(np.float64) * _INV_2_53


# ---------------------------------------------------------------------------
# Event-driven walk simulation

def _site_entry(env_seed, p, law_kind, law_params, scan_limit, dim, x, cache):
    """Neighbor table at site x: targets, conductances, total rate.

    Scan order is fixed (axes ascending, direction -1 then +1) and the rate
    accumulates in that order; the compiled twin replicates both.
    """
    ent = cache.get(x)
    if ent is not None:
        return ent
    targets = []
    conds = []
    mu = 0.0
    for axis in range(dim):
        for sign in (-1, 1):
            found = -1
            for h in range(1, scan_limit + 1):
                y = list(x)
                y[axis] += sign * h
                if site_open(env_seed, p, y):
                    found = h
                    break
            if found < 0:
                raise ScanLimitError(
                    f"no open site within {scan_limit} steps of {x} along "
                    f"axis {axis}, direction {sign:+d}")
            if sign > 0:
                base = x
            else:
                base = tuple(y)
            c = conductance_scalar(env_seed, law_kind, law_params, base, axis)
            targets.append(tuple(y))
            conds.append(c)
            mu += c
    ent = (targets, conds, mu)
    cache[x] = ent
    return ent


def walk_ensemble(dim, env_seed, p, law_kind, law_params, scan_limit,
                  run_seed, csrw, t_grid, n_walks, x0, max_events,
                  fresh_env_per_walk=False):
    """Simulate n_walks independent walks, recording state at grid times.

    Returns (positions (n, G, d) int64, clock (n, G) float64, events (n,)).
    clock is the accumulated integral of the local rate mu(X_s) ds up to each
    grid time (the VSRW->CSRW time change). kind: csrw=True holds Exp(1),
    else Exp(mu(x)); both jump proportionally to edge conductance.
    """
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    ngrid = t_grid.shape[0]
    positions = np.empty((n_walks, ngrid, dim), dtype=np.int64)
    clock = np.empty((n_walks, ngrid), dtype=np.float64)
    events = np.empty(n_walks, dtype=np.int64)
    law_params = tuple(float(v) for v in law_params)
    x0 = tuple(int(v) for v in x0)
    shared_cache: dict = {}
    for w in range(n_walks):
        eseed = (env_seed + w) & MASK64 if fresh_env_per_walk else env_seed
        cache = {} if fresh_env_per_walk else shared_cache
        wseed = hash_words(run_seed, (CH_WALK, w))
        x = x0
        t = 0.0
        acc = 0.0
        k = 0
        gi = 0
        while True:
            targets, conds, mu = _site_entry(
                eseed, p, law_kind, law_params, scan_limit, dim, x, cache)
            rate = 1.0 if csrw else mu
            u = u01(hash_words(wseed, (CH_HOLD, k)))
            dt = -math.log1p(-u) / rate
            t_next = t + dt
            while gi < ngrid and t_grid[gi] < t_next:
                positions[w, gi] = x
                clock[w, gi] = acc + mu * (t_grid[gi] - t)
                gi += 1
            if gi >= ngrid:
                break
            acc += mu * dt
            t = t_next
            r = u01(hash_words(wseed, (CH_JUMP, k))) * mu
            csum = 0.0
            pick = len(conds) - 1
            for j, c in enumerate(conds):
                csum += c
                if r < csum:
                    pick = j
                    break
            x = targets[pick]
            k += 1
            if k >= max_events:
                raise ResourceLimitError(
                    f"walk {w} exceeded {max_events} events before t={t_grid[-1]}")
        events[w] = k
    return positions, clock, events


def walk_path(dim, env_seed, p, law_kind, law_params, scan_limit,
              run_seed, walk_index, csrw, horizon, x0, max_events):
    """Full jump chain of one walk up to the horizon.

    Returns (times, positions, rates): times[i] is the arrival time at
    positions[i] (times[0] = 0), rates[i] the total conductance mu there.
    The state is frozen at the horizon; the censored final hold is not
    represented (the last row is the last arrival before the horizon).
    """
    law_params = tuple(float(v) for v in law_params)
    wseed = hash_words(run_seed, (CH_WALK, walk_index))
    cache: dict = {}
    x = tuple(int(v) for v in x0)
    times = [0.0]
    chain = [x]
    targets, conds, mu = _site_entry(
        env_seed, p, law_kind, law_params, scan_limit, dim, x, cache)
    rates = [mu]
    t = 0.0
    k = 0
    while True:
        rate = 1.0 if csrw else mu
        u = u01(hash_words(wseed, (CH_HOLD, k)))
        dt = -math.log1p(-u) / rate
        if t + dt > horizon:
            break
        t += dt
        r = u01(hash_words(wseed, (CH_JUMP, k))) * mu
        csum = 0.0
        pick = len(conds) - 1
        for j, c in enumerate(conds):
            csum += c
            if r < csum:
                pick = j
                break
        x = targets[pick]
        k += 1
        if k >= max_events:
            raise ResourceLimitError(
                f"walk exceeded {max_events} events before t={horizon}")
        targets, conds, mu = _site_entry(
            env_seed, p, law_kind, law_params, scan_limit, dim, x, cache)
        times.append(t)
        chain.append(x)
        rates.append(mu)
    return (np.array(times, dtype=np.float64),
            np.array(chain, dtype=np.int64).reshape(len(chain), dim),
            np.array(rates, dtype=np.float64))


# ---------------------------------------------------------------------------
# Shortest-path congestion (Brandes accumulation)

def brandes_edge_flow(indptr, indices, edge_ids, n_edges):
    """Fractional shortest-path flow through each undirected edge.

    Unit flow between every unordered vertex pair, spread uniformly over all
    shortest paths (classical edge betweenness). CSR input must describe a
    simple connected graph; edge_ids maps each directed slot to its
    undirected edge. Accumulation order is fixed so the compiled twin matches
    bitwise.
    """
    n = len(indptr) - 1
    flow = np.zeros(n_edges, dtype=np.float64)
    sigma = np.zeros(n, dtype=np.float64)
    dist = np.zeros(n, dtype=np.int64)
    delta = np.zeros(n, dtype=np.float64)
    order = np.zeros(n, dtype=np.int64)
    queue = np.zeros(n, dtype=np.int64)
    for s in range(n):
        sigma[:] = 0.0
        dist[:] = -1
        delta[:] = 0.0
        sigma[s] = 1.0
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        cnt = 0
        while head < tail:
            v = queue[head]
            head += 1
            order[cnt] = v
            cnt += 1
            dv = dist[v]
            for ptr in range(indptr[v], indptr[v + 1]):
                w = indices[ptr]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue[tail] = w
                    tail += 1
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        for i in range(cnt - 1, -1, -1):
            v = order[i]
            dv = dist[v]
            sv = sigma[v]
            for ptr in range(indptr[v], indptr[v + 1]):
                w = indices[ptr]
                if dist[w] == dv + 1:
                    c = sv / sigma[w] * (1.0 + delta[w])
                    flow[edge_ids[ptr]] += c
                    delta[v] += c
    flow *= 0.5  # every unordered pair was counted from both endpoints
    return flow
