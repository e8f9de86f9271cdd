"""Pure-Python transportation solver: primal network simplex.

Reference implementation of the pivot rules shared with the compiled core in
_transport_core.pyx; both must visit identical pivot sequences so that solves
agree bit for bit across backends.

The instance is the dense transportation problem: ship supply[i] from source
i to sinks with requirement demand[j] at unit cost cost[i, j].  Arcs are
indexed a = i * k + j; artificial arcs to a dummy root follow and form the
initial strongly feasible spanning tree.  The leaving-arc rule (first minimal
residual scanning the cycle backwards) keeps trees strongly feasible, which
prevents cycling; the entering rule is Dantzig within rotating blocks of size
about sqrt(e) with Bland across blocks.
"""

from __future__ import annotations

import math

import numpy as np

PIVOT_CAP_BASE = 1_000_000


def solve(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray):
    """Returns (rows, cols, flows) of the optimal positive real-arc flows.

    Requires supply > 0, demand > 0, and sums equal up to a few ulps; tiny
    residual imbalance ends up on an artificial arc and is checked at the end.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    m, k = cost.shape
    n = m + k          # real nodes; sources 0..m-1, sinks m..m+k-1
    root = n
    e = m * k          # real arcs; artificial arc for node v has index e + v

    c_flat = cost.ravel()
    max_c = float(np.abs(c_flat).max(initial=0.0))
    big = 1.0 + 4.0 * n * max_c
    # Entering tolerance: must sit above the cancellation noise big * ulp that
    # potentials anchored at +-big inject into reduced costs.
    eps = 1e-11 * (1.0 + max_c)

    x = np.zeros(e + n)
    x[e : e + m] = supply
    x[e + m :] = demand

    # Node potentials; the root entry exists but is never consulted.
    pi = [big] * m + [-big] * k + [0.0]

    parent = [root] * n + [-1]
    edge = list(range(e, e + n)) + [-1]
    size = [1] * n + [n + 1]
    nxt = list(range(1, n)) + [root, 0]
    prv = [root] + list(range(n - 1)) + [n - 1]
    last = list(range(n)) + [n - 1]

    def arc_src(a: int) -> int:
        if a < e:
            return a // k
        v = a - e
        return v if v < m else root

    def arc_dst(a: int) -> int:
        if a < e:
            return m + a % k
        v = a - e
        return root if v < m else v

    def arc_cost(a: int) -> float:
        return c_flat[a] if a < e else big

    def residual(a: int, p: int) -> float:
        # Away from p: forward residual is unbounded (big for artificial arcs),
        # backward residual is the current flow.
        if arc_src(a) == p:
            return math.inf if a < e else big - x[a]
        return float(x[a])

    def find_apex(p: int, q: int) -> int:
        size_p, size_q = size[p], size[q]
        while True:
            while size_p < size_q:
                p = parent[p]
                size_p = size[p]
            while size_p > size_q:
                q = parent[q]
                size_q = size[q]
            if size_p == size_q:
                if p != q:
                    p = parent[p]
                    size_p = size[p]
                    q = parent[q]
                    size_q = size[q]
                else:
                    return p

    def trace_path(p: int, w: int):
        nodes = [p]
        arcs = []
        while p != w:
            arcs.append(edge[p])
            p = parent[p]
            nodes.append(p)
        return nodes, arcs

    def find_cycle(a: int, p: int, q: int):
        w = find_apex(p, q)
        nodes, arcs = trace_path(p, w)
        nodes.reverse()
        arcs.reverse()
        arcs.append(a)
        nodes_r, arcs_r = trace_path(q, w)
        del nodes_r[-1]
        nodes += nodes_r
        arcs += arcs_r
        return nodes, arcs

    def find_leaving(nodes, arcs):
        best = math.inf
        best_a = -1
        best_p = -1
        for a, p in zip(reversed(arcs), reversed(nodes)):
            r = residual(a, p)
            if r < best:
                best, best_a, best_p = r, a, p
        t = arc_dst(best_a) if arc_src(best_a) == best_p else arc_src(best_a)
        return best_a, best_p, t, best

    def augment(nodes, arcs, f: float):
        if f == 0.0:
            return
        for a, p in zip(arcs, nodes):
            if arc_src(a) == p:
                x[a] += f
            else:
                x[a] -= f

    def remove_edge(s: int, t: int):
        size_t = size[t]
        prev_t = prv[t]
        last_t = last[t]
        next_last_t = nxt[last_t]
        parent[t] = -1
        edge[t] = -1
        nxt[prev_t] = next_last_t
        prv[next_last_t] = prev_t
        nxt[last_t] = t
        prv[t] = last_t
        while s != -1:
            size[s] -= size_t
            if last[s] == last_t:
                last[s] = prev_t
            s = parent[s]

    def make_root(q: int):
        ancestors = []
        while q != -1:
            ancestors.append(q)
            q = parent[q]
        ancestors.reverse()
        for p, q in zip(ancestors, ancestors[1:]):
            size_p = size[p]
            last_p = last[p]
            prev_q = prv[q]
            last_q = last[q]
            next_last_q = nxt[last_q]
            parent[p] = q
            parent[q] = -1
            edge[p] = edge[q]
            edge[q] = -1
            size[p] = size_p - size[q]
            size[q] = size_p
            nxt[prev_q] = next_last_q
            prv[next_last_q] = prev_q
            nxt[last_q] = q
            prv[q] = last_q
            if last_p == last_q:
                last[p] = prev_q
                last_p = prev_q
            prv[p] = last_q
            nxt[last_q] = p
            nxt[last_p] = q
            prv[q] = last_p
            last[q] = last_p

    def add_edge(a: int, p: int, q: int):
        last_p = last[p]
        next_last_p = nxt[last_p]
        size_q = size[q]
        last_q = last[q]
        parent[q] = p
        edge[q] = a
        nxt[last_p] = q
        prv[q] = last_p
        prv[next_last_p] = last_q
        nxt[last_q] = next_last_p
        while p != -1:
            size[p] += size_q
            if last[p] == last_p:
                last[p] = last_q
            p = parent[p]

    def update_potentials(a: int, p: int, q: int):
        if q == arc_dst(a):
            d = pi[p] - arc_cost(a) - pi[q]
        else:
            d = pi[p] + arc_cost(a) - pi[q]
        v = q
        pi[v] += d
        stop = last[q]
        while v != stop:
            v = nxt[v]
            pi[v] += d

    # Entering scan state: rotating block pointer survives across pivots.
    block = int(math.ceil(math.sqrt(e)))
    n_blocks = (e + block - 1) // block
    first = 0
    pivots = 0
    pivot_cap = PIVOT_CAP_BASE + 100 * n

    while True:
        pi_np = np.array(pi)
        entering = -1
        misses = 0
        while misses < n_blocks:
            stop = first + block
            if stop <= e:
                idx = np.arange(first, stop)
            else:
                idx = np.concatenate([np.arange(first, e), np.arange(stop - e)])
                stop -= e
            first = stop
            rc = c_flat[idx] - pi_np[idx // k] + pi_np[m + idx % k]
            j = int(np.argmin(rc))
            if rc[j] < -eps:
                entering = int(idx[j])
                break
            misses += 1
        if entering < 0:
            break

        p, q = arc_src(entering), arc_dst(entering)
        nodes, arcs = find_cycle(entering, p, q)
        leaving, s, t, r = find_leaving(nodes, arcs)
        augment(nodes, arcs, r)
        if entering != leaving:
            if parent[t] != s:
                s, t = t, s
            if arcs.index(entering) > arcs.index(leaving):
                p, q = q, p
            remove_edge(s, t)
            make_root(q)
            add_edge(entering, p, q)
            update_potentials(entering, p, q)
        pivots += 1
        if pivots > pivot_cap:
            raise RuntimeError("transport solver exceeded its pivot budget")

    if float(np.abs(x[e:]).max(initial=0.0)) > 1e-9:
        raise RuntimeError("transport instance is unbalanced beyond tolerance")

    live = np.flatnonzero(x[:e] > 0.0)
    rows = (live // k).astype(np.int64)
    cols = (live % k).astype(np.int64)
    return rows, cols, x[live]
