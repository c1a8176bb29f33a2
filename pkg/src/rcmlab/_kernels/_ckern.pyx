# distutils: language = c++
# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False
# cython: cdivision=True
"""Compiled twins of the scalar-sequential kernels in ``_pykern``.

Bit-identical by contract: integer hashing is the same uint64 arithmetic,
float transforms call the same libm entry points (pow, log1p) one value at
a time, and every float accumulation runs in the order the reference fixes.
Anything that would be free to reorder (SIMD reductions, fused multiply-add)
is avoided on purpose.
"""

from cython.operator cimport dereference as deref
from libc.math cimport log1p, pow
from libc.stdint cimport int64_t, uint64_t
from libcpp.string cimport string
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np

from ..errors import ResourceLimitError, ScanLimitError

BACKEND_NAME = "compiled"

_PY_MASK64 = (1 << 64) - 1

cdef uint64_t CH_SITE = 0xA5
cdef uint64_t CH_EDGE = 0xB7
cdef uint64_t CH_WALK = 0xC9
cdef uint64_t CH_HOLD = 0xD1
cdef uint64_t CH_JUMP = 0xE3

cdef int LAW_CONSTANT = 0
cdef int LAW_PARETO = 1
cdef int LAW_SHIFTED_EXPONENTIAL = 2
cdef int LAW_TWO_POINT = 3

# 2.0 ** -53; a power of two, so multiplying by it only shifts the exponent.
cdef double INV_2_53 = 2.0 ** -53


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _u01(uint64_t h) nogil:
    # h >> 11 has at most 53 bits, so the double conversion is exact.
    return <double>(h >> 11) * INV_2_53


cdef inline bint _site_open(uint64_t seed, double p,
                            const int64_t* coords, int dim) nogil:
    cdef uint64_t h = _mix64(_mix64(seed) ^ CH_SITE)
    cdef int i
    for i in range(dim):
        h = _mix64(h ^ <uint64_t>coords[i])
    return _u01(h) < p


cdef inline double _law_transform(double u, int law_kind,
                                  double p0, double p1, double p2) nogil:
    if law_kind == LAW_CONSTANT:
        return p0
    if law_kind == LAW_PARETO:
        return pow(1.0 - u, -1.0 / p0)
    if law_kind == LAW_SHIFTED_EXPONENTIAL:
        return 1.0 + (-log1p(-u)) / p0
    # LAW_TWO_POINT; unknown codes are rejected before entering C loops.
    if u < p2:
        return p1
    return p0


cdef inline double _edge_uniform(uint64_t seed, int64_t axis,
                                 const int64_t* base, int dim) nogil:
    cdef uint64_t h = _mix64(_mix64(seed) ^ CH_EDGE)
    cdef int i
    h = _mix64(h ^ <uint64_t>axis)
    for i in range(dim):
        h = _mix64(h ^ <uint64_t>base[i])
    return _u01(h)


# ---------------------------------------------------------------------------
# Public scalar twins. Word arguments are masked in Python space first so
# arbitrary-precision ints behave exactly like the reference's ``& MASK64``.

def mix64(z):
    """splitmix64 finalizer on a 64-bit word."""
    return _mix64(<uint64_t>(z & _PY_MASK64))


def hash_words(seed, words):
    """Chain-hash a key: h = mix(seed); h = mix(h ^ w) for each word."""
    cdef uint64_t h = _mix64(<uint64_t>(seed & _PY_MASK64))
    for w in words:
        h = _mix64(h ^ <uint64_t>(w & _PY_MASK64))
    return h


def u01(h):
    """Map a 64-bit hash to a uniform double in [0, 1)."""
    return (h >> 11) * INV_2_53


def site_open(seed, p, coords):
    cdef uint64_t h = _mix64(<uint64_t>(seed & _PY_MASK64))
    cdef double pp = p
    h = _mix64(h ^ CH_SITE)
    for c in coords:
        h = _mix64(h ^ <uint64_t>(c & _PY_MASK64))
    return _u01(h) < pp


def conductance_scalar(seed, law_kind, law_params, base, axis):
    cdef int kind = law_kind
    cdef double p0 = 0.0, p1 = 0.0, p2 = 0.0
    _unpack_params(law_params, kind, &p0, &p1, &p2)
    cdef uint64_t h = _mix64(<uint64_t>(seed & _PY_MASK64))
    h = _mix64(h ^ CH_EDGE)
    h = _mix64(h ^ <uint64_t>(axis & _PY_MASK64))
    for c in base:
        h = _mix64(h ^ <uint64_t>(c & _PY_MASK64))
    return _law_transform(_u01(h), kind, p0, p1, p2)


cdef int _unpack_params(object law_params, int law_kind,
                        double* p0, double* p1, double* p2) except -1:
    cdef int n = len(law_params)
    if law_kind < LAW_CONSTANT or law_kind > LAW_TWO_POINT:
        raise ValueError(f"unknown law kind {law_kind}")
    p0[0] = law_params[0] if n > 0 else 0.0
    p1[0] = law_params[1] if n > 1 else 0.0
    p2[0] = law_params[2] if n > 2 else 0.0
    return 0


# ---------------------------------------------------------------------------
# Event-driven walk simulation

cdef inline string _pack_site(const int64_t* x, int dim):
    return string(<const char*>x, dim * sizeof(int64_t))


cdef int64_t _site_entry(unordered_map[string, int64_t]& cache,
                         vector[int64_t]& targ_store,
                         vector[double]& cond_store,
                         vector[double]& mu_store,
                         uint64_t env_seed, double p, int law_kind,
                         double p0, double p1, double p2,
                         int scan_limit, int dim,
                         const int64_t* x, int64_t* ybuf) except -1:
    """Entry id for site x, building the neighbor table on first visit.

    Scan order is fixed (axes ascending, direction -1 then +1) and the total
    rate accumulates in that order, matching the reference. Stores are
    parallel, indexed by entry id: 2*dim*dim target coords, 2*dim weights,
    one total rate per entry.
    """
    cdef string key = _pack_site(x, dim)
    cdef unordered_map[string, int64_t].iterator it = cache.find(key)
    if it != cache.end():
        return deref(it).second
    cdef int axis, i, sign_idx
    cdef int64_t sign, h, found
    cdef double c, mu = 0.0
    cdef int64_t ent = <int64_t>mu_store.size()
    cdef list coords_py
    for axis in range(dim):
        for sign_idx in range(2):
            sign = -1 if sign_idx == 0 else 1
            found = -1
            for h in range(1, scan_limit + 1):
                for i in range(dim):
                    ybuf[i] = x[i]
                ybuf[axis] = x[axis] + sign * h
                if _site_open(env_seed, p, ybuf, dim):
                    found = h
                    break
            if found < 0:
                coords_py = []
                for i in range(dim):
                    coords_py.append(x[i])
                raise ScanLimitError(
                    f"no open site within {scan_limit} steps of "
                    f"{tuple(coords_py)} along axis {axis}, "
                    f"direction {'+1' if sign > 0 else '-1'}")
            if sign > 0:
                c = _edge_uniform(env_seed, axis, x, dim)
            else:
                c = _edge_uniform(env_seed, axis, ybuf, dim)
            c = _law_transform(c, law_kind, p0, p1, p2)
            for i in range(dim):
                targ_store.push_back(ybuf[i])
            cond_store.push_back(c)
            mu += c
    mu_store.push_back(mu)
    cache[key] = ent
    return ent


def walk_ensemble(dim, env_seed, p, law_kind, law_params, scan_limit,
                  run_seed, csrw, t_grid, n_walks, x0, max_events,
                  fresh_env_per_walk=False):
    """Simulate n_walks independent walks, recording state at grid times.

    Returns (positions (n, G, d) int64, clock (n, G) float64, events (n,)).
    Twin of the reference implementation; see its docstring for semantics.
    """
    cdef int cdim = dim
    cdef int kind = law_kind
    cdef int climit = scan_limit
    cdef bint is_csrw = bool(csrw)
    cdef bint fresh = bool(fresh_env_per_walk)
    cdef int64_t n = n_walks
    cdef int64_t cap = max_events
    cdef uint64_t eseed0 = <uint64_t>(env_seed & _PY_MASK64)
    cdef uint64_t rseed = <uint64_t>(run_seed & _PY_MASK64)
    cdef double pp = p
    cdef double p0 = 0.0, p1 = 0.0, p2 = 0.0
    _unpack_params(tuple(float(v) for v in law_params), kind, &p0, &p1, &p2)

    grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef double[::1] tg = grid
    cdef int64_t ngrid = tg.shape[0]
    positions = np.empty((n_walks, ngrid, cdim), dtype=np.int64)
    clock = np.empty((n_walks, ngrid), dtype=np.float64)
    events = np.empty(n_walks, dtype=np.int64)
    cdef int64_t[:, :, ::1] pos_v = positions
    cdef double[:, ::1] clock_v = clock
    cdef int64_t[::1] events_v = events

    start = tuple(int(v) for v in x0)
    if len(start) != cdim:
        raise ValueError(f"x0 has {len(start)} coordinates, expected {cdim}")
    cdef vector[int64_t] xbuf = vector[int64_t](cdim)
    cdef vector[int64_t] ybuf = vector[int64_t](cdim)

    cdef unordered_map[string, int64_t] cache
    cdef vector[int64_t] targ_store
    cdef vector[double] cond_store
    cdef vector[double] mu_store
    cdef uint64_t eseed, wseed, hh
    cdef int64_t w, k, gi, ent, pick, j, nslots = 2 * cdim
    cdef int i
    cdef double t, acc, mu, rate, u, dt, t_next, r, csum
    cdef const int64_t* tptr
    cdef const double* cptr

    for w in range(n):
        if fresh:
            eseed = eseed0 + <uint64_t>w
            cache.clear()
            targ_store.clear()
            cond_store.clear()
            mu_store.clear()
        else:
            eseed = eseed0
        wseed = _mix64(_mix64(rseed) ^ CH_WALK)
        wseed = _mix64(wseed ^ <uint64_t>w)
        for i in range(cdim):
            xbuf[i] = start[i]
        t = 0.0
        acc = 0.0
        k = 0
        gi = 0
        while True:
            ent = _site_entry(cache, targ_store, cond_store, mu_store,
                              eseed, pp, kind, p0, p1, p2,
                              climit, cdim, xbuf.data(), ybuf.data())
            mu = mu_store[ent]
            rate = 1.0 if is_csrw else mu
            hh = _mix64(_mix64(wseed) ^ CH_HOLD)
            u = _u01(_mix64(hh ^ <uint64_t>k))
            dt = -log1p(-u) / rate
            t_next = t + dt
            while gi < ngrid and tg[gi] < t_next:
                for i in range(cdim):
                    pos_v[w, gi, i] = xbuf[i]
                clock_v[w, gi] = acc + mu * (tg[gi] - t)
                gi += 1
            if gi >= ngrid:
                break
            acc += mu * dt
            t = t_next
            hh = _mix64(_mix64(wseed) ^ CH_JUMP)
            r = _u01(_mix64(hh ^ <uint64_t>k)) * mu
            cptr = cond_store.data() + ent * nslots
            csum = 0.0
            pick = nslots - 1
            for j in range(nslots):
                csum += cptr[j]
                if r < csum:
                    pick = j
                    break
            tptr = targ_store.data() + (ent * nslots + pick) * cdim
            for i in range(cdim):
                xbuf[i] = tptr[i]
            k += 1
            if k >= cap:
                raise ResourceLimitError(
                    f"walk {w} exceeded {max_events} events before "
                    f"t={grid[ngrid - 1]}")
        events_v[w] = k
    return positions, clock, events


def walk_path(dim, env_seed, p, law_kind, law_params, scan_limit,
              run_seed, walk_index, csrw, horizon, x0, max_events):
    """Full jump chain of one walk up to the horizon.

    Returns (times, positions, rates); twin of the reference implementation.
    """
    cdef int cdim = dim
    cdef int kind = law_kind
    cdef int climit = scan_limit
    cdef bint is_csrw = bool(csrw)
    cdef int64_t cap = max_events
    cdef uint64_t eseed = <uint64_t>(env_seed & _PY_MASK64)
    cdef uint64_t rseed = <uint64_t>(run_seed & _PY_MASK64)
    cdef double pp = p
    cdef double hz = horizon
    cdef double p0 = 0.0, p1 = 0.0, p2 = 0.0
    _unpack_params(tuple(float(v) for v in law_params), kind, &p0, &p1, &p2)

    cdef uint64_t wseed = _mix64(_mix64(rseed) ^ CH_WALK)
    wseed = _mix64(wseed ^ <uint64_t>(walk_index & _PY_MASK64))

    start = tuple(int(v) for v in x0)
    if len(start) != cdim:
        raise ValueError(f"x0 has {len(start)} coordinates, expected {cdim}")
    cdef vector[int64_t] xbuf = vector[int64_t](cdim)
    cdef vector[int64_t] ybuf = vector[int64_t](cdim)
    cdef int i
    for i in range(cdim):
        xbuf[i] = start[i]

    cdef unordered_map[string, int64_t] cache
    cdef vector[int64_t] targ_store
    cdef vector[double] cond_store
    cdef vector[double] mu_store
    cdef vector[double] times
    cdef vector[int64_t] chain
    cdef vector[double] rates
    cdef uint64_t hh
    cdef int64_t k = 0, ent, pick, j, nslots = 2 * cdim
    cdef double t = 0.0, mu, rate, u, dt, r, csum
    cdef const int64_t* tptr
    cdef const double* cptr

    times.push_back(0.0)
    for i in range(cdim):
        chain.push_back(xbuf[i])
    ent = _site_entry(cache, targ_store, cond_store, mu_store,
                      eseed, pp, kind, p0, p1, p2,
                      climit, cdim, xbuf.data(), ybuf.data())
    mu = mu_store[ent]
    rates.push_back(mu)
    while True:
        rate = 1.0 if is_csrw else mu
        hh = _mix64(_mix64(wseed) ^ CH_HOLD)
        u = _u01(_mix64(hh ^ <uint64_t>k))
        dt = -log1p(-u) / rate
        if t + dt > hz:
            break
        t += dt
        hh = _mix64(_mix64(wseed) ^ CH_JUMP)
        r = _u01(_mix64(hh ^ <uint64_t>k)) * mu
        cptr = cond_store.data() + ent * nslots
        csum = 0.0
        pick = nslots - 1
        for j in range(nslots):
            csum += cptr[j]
            if r < csum:
                pick = j
                break
        tptr = targ_store.data() + (ent * nslots + pick) * cdim
        for i in range(cdim):
            xbuf[i] = tptr[i]
        k += 1
        if k >= cap:
            raise ResourceLimitError(
                f"walk exceeded {max_events} events before t={horizon}")
        ent = _site_entry(cache, targ_store, cond_store, mu_store,
                          eseed, pp, kind, p0, p1, p2,
                          climit, cdim, xbuf.data(), ybuf.data())
        mu = mu_store[ent]
        times.push_back(t)
        for i in range(cdim):
            chain.push_back(xbuf[i])
        rates.push_back(mu)

    cdef int64_t nsteps = <int64_t>times.size()
    times_np = np.empty(nsteps, dtype=np.float64)
    chain_np = np.empty((nsteps, cdim), dtype=np.int64)
    rates_np = np.empty(nsteps, dtype=np.float64)
    cdef double[::1] times_v = times_np
    cdef int64_t[:, ::1] chain_v = chain_np
    cdef double[::1] rates_v = rates_np
    cdef int64_t s
    for s in range(nsteps):
        times_v[s] = times[s]
        rates_v[s] = rates[s]
        for i in range(cdim):
            chain_v[s, i] = chain[s * cdim + i]
    return times_np, chain_np, rates_np


# ---------------------------------------------------------------------------
# Shortest-path congestion (Brandes accumulation)

def brandes_edge_flow(indptr, indices, edge_ids, n_edges):
    """Fractional shortest-path flow through each undirected edge.

    Twin of the reference implementation: same BFS slot order, same reverse
    accumulation order, so the result matches bitwise.
    """
    indptr_a = np.ascontiguousarray(indptr, dtype=np.int64)
    indices_a = np.ascontiguousarray(indices, dtype=np.int64)
    edge_ids_a = np.ascontiguousarray(edge_ids, dtype=np.int64)
    cdef const int64_t[::1] ip = indptr_a
    cdef const int64_t[::1] nbr = indices_a
    cdef const int64_t[::1] eid = edge_ids_a
    cdef int64_t n = ip.shape[0] - 1
    cdef int64_t m = n_edges

    flow_np = np.zeros(m, dtype=np.float64)
    cdef double[::1] flow = flow_np
    cdef vector[double] sigma = vector[double](n)
    cdef vector[int64_t] dist = vector[int64_t](n)
    cdef vector[double] delta = vector[double](n)
    cdef vector[int64_t] order = vector[int64_t](n)
    cdef vector[int64_t] queue = vector[int64_t](n)

    cdef int64_t s, v, w, ptr, head, tail, cnt, i, dv
    cdef double sv, c
    for s in range(n):
        for v in range(n):
            sigma[v] = 0.0
            dist[v] = -1
            delta[v] = 0.0
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
            for ptr in range(ip[v], ip[v + 1]):
                w = nbr[ptr]
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
            for ptr in range(ip[v], ip[v + 1]):
                w = nbr[ptr]
                if dist[w] == dv + 1:
                    c = sv / sigma[w] * (1.0 + delta[w])
                    flow[eid[ptr]] += c
                    delta[v] += c
    flow_np *= 0.5  # every unordered pair was counted from both endpoints
    return flow_np
