# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled transportation solver: primal network simplex.

Mirrors _transport_fallback.py pivot for pivot; the two backends must return
bit-identical flows.  See that module for the algorithm description.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, ceil, fabs, sqrt

cnp.import_array()

PIVOT_CAP_BASE = 1_000_000


cdef class _Simplex:
    cdef Py_ssize_t m, k, n, root, e
    cdef double big, eps
    cdef double[::1] c_flat, x, pi
    cdef Py_ssize_t[::1] parent, edge, size, nxt, prv, last
    cdef Py_ssize_t[::1] cyc_nodes, cyc_arcs
    cdef object x_obj

    def __init__(self, cost, supply, demand):
        cost = np.ascontiguousarray(cost, dtype=np.float64)
        supply = np.asarray(supply, dtype=np.float64)
        demand = np.asarray(demand, dtype=np.float64)
        cdef Py_ssize_t m = cost.shape[0], k = cost.shape[1]
        cdef Py_ssize_t n = m + k, e = m * k
        self.m, self.k, self.n, self.root, self.e = m, k, n, n, e

        self.c_flat = cost.ravel()
        cdef double max_c = float(np.abs(cost).max(initial=0.0))
        self.big = 1.0 + 4.0 * n * max_c
        self.eps = 1e-11 * (1.0 + max_c)

        x = np.zeros(e + n)
        x[e : e + m] = supply
        x[e + m :] = demand
        self.x_obj = x
        self.x = x

        pi = np.empty(n + 1)
        pi[:m] = self.big
        pi[m:n] = -self.big
        pi[n] = 0.0
        self.pi = pi

        self.parent = np.concatenate(
            [np.full(n, n, dtype=np.intp), [-1]]
        ).astype(np.intp)
        self.edge = np.concatenate(
            [np.arange(e, e + n, dtype=np.intp), [-1]]
        ).astype(np.intp)
        self.size = np.concatenate(
            [np.ones(n, dtype=np.intp), [n + 1]]
        ).astype(np.intp)
        self.nxt = np.concatenate(
            [np.arange(1, n, dtype=np.intp), [n, 0]]
        ).astype(np.intp)
        self.prv = np.concatenate(
            [[n], np.arange(n - 1, dtype=np.intp), [n - 1]]
        ).astype(np.intp)
        self.last = np.concatenate(
            [np.arange(n, dtype=np.intp), [n - 1]]
        ).astype(np.intp)
        self.cyc_nodes = np.empty(2 * n + 4, dtype=np.intp)
        self.cyc_arcs = np.empty(2 * n + 4, dtype=np.intp)

    cdef inline Py_ssize_t arc_src(self, Py_ssize_t a):
        cdef Py_ssize_t v
        if a < self.e:
            return a // self.k
        v = a - self.e
        return v if v < self.m else self.root

    cdef inline Py_ssize_t arc_dst(self, Py_ssize_t a):
        cdef Py_ssize_t v
        if a < self.e:
            return self.m + a % self.k
        v = a - self.e
        return self.root if v < self.m else v

    cdef inline double arc_cost(self, Py_ssize_t a):
        return self.c_flat[a] if a < self.e else self.big

    cdef inline double residual(self, Py_ssize_t a, Py_ssize_t p):
        if self.arc_src(a) == p:
            return INFINITY if a < self.e else self.big - self.x[a]
        return self.x[a]

    cdef Py_ssize_t find_apex(self, Py_ssize_t p, Py_ssize_t q):
        cdef Py_ssize_t size_p = self.size[p], size_q = self.size[q]
        while True:
            while size_p < size_q:
                p = self.parent[p]
                size_p = self.size[p]
            while size_p > size_q:
                q = self.parent[q]
                size_q = self.size[q]
            if size_p == size_q:
                if p != q:
                    p = self.parent[p]
                    size_p = self.size[p]
                    q = self.parent[q]
                    size_q = self.size[q]
                else:
                    return p

    cdef Py_ssize_t find_cycle(self, Py_ssize_t a, Py_ssize_t p, Py_ssize_t q):
        """Fills the cycle buffers; returns the arc count.

        Layout matches the reference: nodes w..p then q..(below w); arcs are
        the reversed p-path, the entering arc at index len(p-path), then the
        q-path.
        """
        cdef Py_ssize_t w = self.find_apex(p, q)
        cdef Py_ssize_t lp = 0, lq = 0, v, t
        v = p
        while v != w:
            lp += 1
            v = self.parent[v]
        v = p
        t = 0
        while v != w:
            self.cyc_nodes[lp - t] = v
            self.cyc_arcs[lp - 1 - t] = self.edge[v]
            v = self.parent[v]
            t += 1
        self.cyc_nodes[0] = w
        self.cyc_arcs[lp] = a
        v = q
        t = 0
        while v != w:
            self.cyc_nodes[lp + 1 + t] = v
            self.cyc_arcs[lp + 1 + t] = self.edge[v]
            v = self.parent[v]
            t += 1
        lq = t
        return lp + 1 + lq

    cdef void augment(self, Py_ssize_t cnt, double f):
        cdef Py_ssize_t t, a
        if f == 0.0:
            return
        for t in range(cnt):
            a = self.cyc_arcs[t]
            if self.arc_src(a) == self.cyc_nodes[t]:
                self.x[a] += f
            else:
                self.x[a] -= f

    cdef void remove_edge(self, Py_ssize_t s, Py_ssize_t t):
        cdef Py_ssize_t size_t_ = self.size[t]
        cdef Py_ssize_t prev_t = self.prv[t]
        cdef Py_ssize_t last_t = self.last[t]
        cdef Py_ssize_t next_last_t = self.nxt[last_t]
        self.parent[t] = -1
        self.edge[t] = -1
        self.nxt[prev_t] = next_last_t
        self.prv[next_last_t] = prev_t
        self.nxt[last_t] = t
        self.prv[t] = last_t
        while s != -1:
            self.size[s] -= size_t_
            if self.last[s] == last_t:
                self.last[s] = prev_t
            s = self.parent[s]

    cdef void make_root(self, Py_ssize_t q):
        cdef Py_ssize_t[::1] anc = self.cyc_nodes  # reuse as scratch
        cdef Py_ssize_t cnt = 0, i, p
        cdef Py_ssize_t size_p, last_p, prev_q, last_q, next_last_q
        while q != -1:
            anc[cnt] = q
            cnt += 1
            q = self.parent[q]
        for i in range(cnt - 1, 0, -1):
            p = anc[i]
            q = anc[i - 1]
            size_p = self.size[p]
            last_p = self.last[p]
            prev_q = self.prv[q]
            last_q = self.last[q]
            next_last_q = self.nxt[last_q]
            self.parent[p] = q
            self.parent[q] = -1
            self.edge[p] = self.edge[q]
            self.edge[q] = -1
            self.size[p] = size_p - self.size[q]
            self.size[q] = size_p
            self.nxt[prev_q] = next_last_q
            self.prv[next_last_q] = prev_q
            self.nxt[last_q] = q
            self.prv[q] = last_q
            if last_p == last_q:
                self.last[p] = prev_q
                last_p = prev_q
            self.prv[p] = last_q
            self.nxt[last_q] = p
            self.nxt[last_p] = q
            self.prv[q] = last_p
            self.last[q] = last_p

    cdef void add_edge(self, Py_ssize_t a, Py_ssize_t p, Py_ssize_t q):
        cdef Py_ssize_t last_p = self.last[p]
        cdef Py_ssize_t next_last_p = self.nxt[last_p]
        cdef Py_ssize_t size_q = self.size[q]
        cdef Py_ssize_t last_q = self.last[q]
        self.parent[q] = p
        self.edge[q] = a
        self.nxt[last_p] = q
        self.prv[q] = last_p
        self.prv[next_last_p] = last_q
        self.nxt[last_q] = next_last_p
        while p != -1:
            self.size[p] += size_q
            if self.last[p] == last_p:
                self.last[p] = last_q
            p = self.parent[p]

    cdef void update_potentials(self, Py_ssize_t a, Py_ssize_t p, Py_ssize_t q):
        cdef double d
        cdef Py_ssize_t v, stop
        if q == self.arc_dst(a):
            d = self.pi[p] - self.arc_cost(a) - self.pi[q]
        else:
            d = self.pi[p] + self.arc_cost(a) - self.pi[q]
        v = q
        self.pi[v] += d
        stop = self.last[q]
        while v != stop:
            v = self.nxt[v]
            self.pi[v] += d

    def run(self):
        cdef Py_ssize_t e = self.e, m = self.m, k = self.k, n = self.n
        cdef Py_ssize_t block = <Py_ssize_t> ceil(sqrt(<double> e))
        cdef Py_ssize_t n_blocks = (e + block - 1) // block
        cdef Py_ssize_t first = 0, misses, stop, a, j, entering
        cdef Py_ssize_t p, q, s, t, leaving, cnt, pos_enter, pos_leave
        cdef double rc, best_rc, r, best_r
        cdef long long pivots = 0
        cdef long long pivot_cap = PIVOT_CAP_BASE + 100 * n

        while True:
            entering = -1
            misses = 0
            while misses < n_blocks:
                stop = first + block
                best_rc = 0.0
                j = -1
                a = first
                while a < stop and a < e:
                    rc = self.c_flat[a] - self.pi[a // k] + self.pi[m + a % k]
                    if rc < best_rc:
                        best_rc = rc
                        j = a
                    a += 1
                if stop > e:
                    stop -= e
                    a = 0
                    while a < stop:
                        rc = self.c_flat[a] - self.pi[a // k] + self.pi[m + a % k]
                        if rc < best_rc:
                            best_rc = rc
                            j = a
                        a += 1
                first = stop if stop != e else 0
                if j >= 0 and best_rc < -self.eps:
                    entering = j
                    break
                misses += 1
            if entering < 0:
                break

            p = self.arc_src(entering)
            q = self.arc_dst(entering)
            cnt = self.find_cycle(entering, p, q)

            best_r = INFINITY
            leaving = -1
            s = -1
            pos_leave = -1
            for t in range(cnt - 1, -1, -1):
                r = self.residual(self.cyc_arcs[t], self.cyc_nodes[t])
                if r < best_r:
                    best_r = r
                    leaving = self.cyc_arcs[t]
                    s = self.cyc_nodes[t]
                    pos_leave = t
            t = self.arc_dst(leaving) if self.arc_src(leaving) == s else self.arc_src(leaving)

            self.augment(cnt, best_r)
            if entering != leaving:
                if self.parent[t] != s:
                    s, t = t, s
                pos_enter = 0
                for j in range(cnt):
                    if self.cyc_arcs[j] == entering:
                        pos_enter = j
                        break
                if pos_enter > pos_leave:
                    p, q = q, p
                self.remove_edge(s, t)
                self.make_root(q)
                self.add_edge(entering, p, q)
                self.update_potentials(entering, p, q)
            pivots += 1
            if pivots > pivot_cap:
                raise RuntimeError("transport solver exceeded its pivot budget")

        x = self.x_obj
        if float(np.abs(x[e:]).max(initial=0.0)) > 1e-9:
            raise RuntimeError("transport instance is unbalanced beyond tolerance")
        live = np.flatnonzero(x[:e] > 0.0)
        rows = (live // k).astype(np.int64)
        cols = (live % k).astype(np.int64)
        return rows, cols, x[live]


def solve(cost, supply, demand):
    """Returns (rows, cols, flows) of the optimal positive real-arc flows."""
    return _Simplex(cost, supply, demand).run()
