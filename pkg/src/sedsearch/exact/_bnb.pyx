# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-and-bound kernel; see ``_bnb_py`` for the reference version."""

from libc.math cimport INFINITY, fabs
from libc.stdlib cimport malloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double TOL = 1e-9
cdef int UNASSIGNED = -2
cdef int DUMMY = -1


cdef class _Search:
    cdef int n1, n2, n_lab, binary
    cdef const unsigned char[:, ::1] adj1
    cdef const unsigned char[:, ::1] adj2
    cdef const int[::1] nb1_ptr
    cdef const int[::1] nb1_idx
    cdef const int[::1] nb2_ptr
    cdef const int[::1] nb2_idx
    cdef const int[::1] deg1
    cdef const int[::1] deg2
    cdef const double[:, ::1] cost
    cdef const double[::1] ins
    cdef const int[::1] lab1
    cdef const int[::1] lab2
    cdef const int[::1] order
    cdef double e_del, e_ins, ins_unit, ub, open_min
    cdef long budget, expansions
    cdef int r1, r2, e1r, e2r, aborted, have_best
    cdef int* img
    cdef int* best
    cdef char* used2
    cdef int* cnt1
    cdef int* cnt2
    # per-depth candidate buffers, stride n2 + 1
    cdef int* cw
    cdef int* cdd
    cdef double* clb
    cdef double* cinc
    cdef list trace

    def __cinit__(self, int n1, int n2, int n_lab):
        cdef int width = n2 + 1
        cdef int depth = n1 if n1 > 0 else 1
        self.img = <int*> malloc(max(n1, 1) * sizeof(int))
        self.best = <int*> malloc(max(n1, 1) * sizeof(int))
        self.used2 = <char*> malloc(max(n2, 1) * sizeof(char))
        self.cnt1 = <int*> malloc(max(n_lab, 1) * sizeof(int))
        self.cnt2 = <int*> malloc(max(n_lab, 1) * sizeof(int))
        self.cw = <int*> malloc(depth * width * sizeof(int))
        self.cdd = <int*> malloc(depth * width * sizeof(int))
        self.clb = <double*> malloc(depth * width * sizeof(double))
        self.cinc = <double*> malloc(depth * width * sizeof(double))
        if (self.img == NULL or self.best == NULL or self.used2 == NULL or self.cnt1 == NULL
                or self.cnt2 == NULL or self.cw == NULL or self.cdd == NULL
                or self.clb == NULL or self.cinc == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self.img)
        free(self.best)
        free(self.used2)
        free(self.cnt1)
        free(self.cnt2)
        free(self.cw)
        free(self.cdd)
        free(self.clb)
        free(self.cinc)

    cdef double bound(self):
        cdef int l, v, w, common
        cdef double nodes, b, mins, edges
        if self.binary:
            common = 0
            for l in range(self.n_lab):
                common += self.cnt1[l] if self.cnt1[l] < self.cnt2[l] else self.cnt2[l]
            nodes = (self.r1 - common)
            if self.r2 > self.r1:
                nodes += (self.r2 - self.r1) * self.ins_unit
        else:
            nodes = 0.0
            for v in range(self.n1):
                if self.img[v] != UNASSIGNED:
                    continue
                b = self.cost[v, self.n2]
                for w in range(self.n2):
                    if not self.used2[w] and self.cost[v, w] < b:
                        b = self.cost[v, w]
                nodes += b
            if self.r2 > self.r1:
                mins = INFINITY
                for w in range(self.n2):
                    if not self.used2[w] and self.ins[w] < mins:
                        mins = self.ins[w]
                nodes += (self.r2 - self.r1) * mins
        edges = 0.0
        if self.e1r > self.e2r:
            edges += self.e_del * (self.e1r - self.e2r)
        if self.e2r > self.e1r:
            edges += self.e_ins * (self.e2r - self.e1r)
        return nodes + edges

    cdef inline int assigned_nbrs1(self, int v):
        cdef int k, a = 0
        for k in range(self.nb1_ptr[v], self.nb1_ptr[v + 1]):
            if self.img[self.nb1_idx[k]] != UNASSIGNED:
                a += 1
        return a

    cdef inline int used_nbrs2(self, int w):
        cdef int k, a = 0
        for k in range(self.nb2_ptr[w], self.nb2_ptr[w + 1]):
            if self.used2[self.nb2_idx[k]]:
                a += 1
        return a

    cdef void apply(self, int v, int w):
        cdef int a1 = self.assigned_nbrs1(v)
        self.img[v] = w
        self.r1 -= 1
        self.cnt1[self.lab1[v]] -= 1
        self.e1r -= a1
        if w >= 0:
            self.e2r -= self.used_nbrs2(w)
            self.used2[w] = 1
            self.r2 -= 1
            self.cnt2[self.lab2[w]] -= 1

    cdef void undo(self, int v, int w):
        self.img[v] = UNASSIGNED
        self.r1 += 1
        self.cnt1[self.lab1[v]] += 1
        self.e1r += self.assigned_nbrs1(v)
        if w >= 0:
            self.used2[w] = 0
            self.r2 += 1
            self.cnt2[self.lab2[w]] += 1
            self.e2r += self.used_nbrs2(w)

    cdef void expand(self, int depth, double g, double lb_here):
        cdef int i, j, k, w, v, u, pu, e1, e2, count, base, idx, dd
        cdef double total, inc, lb, tl, ti
        cdef int tw, tdd
        if depth == self.n1:
            total = g
            for w in range(self.n2):
                if not self.used2[w]:
                    total += self.ins[w]
            total += self.e_ins * self.e2r
            if total < self.ub - TOL:
                self.ub = total
                for i in range(self.n1):
                    self.best[i] = self.img[i]
                self.have_best = 1
                self.trace.append(total)
            return
        if self.expansions >= self.budget and (self.have_best or self.ub < INFINITY):
            self.aborted = 1
            if lb_here < self.open_min:
                self.open_min = lb_here
            return
        self.expansions += 1
        v = self.order[depth]
        base = depth * (self.n2 + 1)
        count = 0
        for j in range(self.n2 + 1):
            w = j if j < self.n2 else DUMMY
            if w >= 0 and self.used2[w]:
                continue
            inc = self.cost[v, j]
            for k in range(depth):
                u = self.order[k]
                pu = self.img[u]
                e1 = self.adj1[v, u]
                e2 = 1 if (w >= 0 and pu >= 0 and self.adj2[w, pu]) else 0
                if e1 and not e2:
                    inc += self.e_del
                elif e2 and not e1:
                    inc += self.e_ins
            self.apply(v, w)
            lb = g + inc + self.bound()
            self.undo(v, w)
            if w >= 0:
                dd = self.deg1[v] - self.deg2[w]
                if dd < 0:
                    dd = -dd
            else:
                dd = self.deg1[v]
            # insertion sort keyed on (lb, dd, index); dummy index is n2
            i = count
            while i > 0 and _key_less(lb, dd, j, self.clb[base + i - 1], self.cdd[base + i - 1],
                                      _idx(self.cw[base + i - 1], self.n2)):
                self.clb[base + i] = self.clb[base + i - 1]
                self.cdd[base + i] = self.cdd[base + i - 1]
                self.cw[base + i] = self.cw[base + i - 1]
                self.cinc[base + i] = self.cinc[base + i - 1]
                i -= 1
            self.clb[base + i] = lb
            self.cdd[base + i] = dd
            self.cw[base + i] = w
            self.cinc[base + i] = inc
            count += 1
        for i in range(count):
            lb = self.clb[base + i]
            if lb >= self.ub - TOL:
                break
            if self.aborted:
                if lb < self.open_min:
                    self.open_min = lb
                break
            w = self.cw[base + i]
            self.apply(v, w)
            self.expand(depth + 1, g + self.cinc[base + i], lb)
            self.undo(v, w)


cdef inline int _idx(int w, int n2):
    return w if w >= 0 else n2


cdef inline bint _key_less(double a_lb, int a_dd, int a_idx, double b_lb, int b_dd, int b_idx):
    if a_lb != b_lb:
        return a_lb < b_lb
    if a_dd != b_dd:
        return a_dd < b_dd
    return a_idx < b_idx


def _csr(nbrs):
    ptr = np.zeros(len(nbrs) + 1, dtype=np.intc)
    flat = []
    for i, row in enumerate(nbrs):
        flat.extend(row)
        ptr[i + 1] = len(flat)
    return ptr, np.asarray(flat, dtype=np.intc)


def bnb_search(
    int n1, int n2, adj1, adj2, nbrs1, nbrs2, deg1, deg2,
    cost, ins, double e_del, double e_ins, lab1, lab2, int n_lab,
    binary, double ins_unit, order, long budget, double init_ub,
):
    """Compiled twin of ``_bnb_py.bnb_search``; same arguments and results."""
    cdef _Search s = _Search(n1, n2, n_lab)
    cdef int v, w
    s.n1 = n1
    s.n2 = n2
    s.n_lab = n_lab
    s.binary = 1 if binary else 0
    s.adj1 = np.ascontiguousarray(adj1, dtype=np.uint8).reshape(n1, n1)
    s.adj2 = np.ascontiguousarray(adj2, dtype=np.uint8).reshape(n2, n2)
    p1, i1 = _csr(nbrs1)
    p2, i2 = _csr(nbrs2)
    s.nb1_ptr = p1
    s.nb1_idx = i1
    s.nb2_ptr = p2
    s.nb2_idx = i2
    s.deg1 = np.ascontiguousarray(deg1, dtype=np.intc)
    s.deg2 = np.ascontiguousarray(deg2, dtype=np.intc)
    s.cost = np.ascontiguousarray(cost, dtype=np.float64).reshape(n1, n2 + 1)
    s.ins = np.ascontiguousarray(ins, dtype=np.float64)
    s.lab1 = np.ascontiguousarray(lab1, dtype=np.intc)
    s.lab2 = np.ascontiguousarray(lab2, dtype=np.intc)
    s.order = np.ascontiguousarray(order, dtype=np.intc)
    s.e_del = e_del
    s.e_ins = e_ins
    s.ins_unit = ins_unit
    s.budget = budget
    s.ub = init_ub
    s.open_min = INFINITY
    s.expansions = 0
    s.aborted = 0
    s.have_best = 0
    s.trace = []
    for v in range(n1):
        s.img[v] = UNASSIGNED
    for w in range(n2):
        s.used2[w] = 0
    for v in range(n_lab):
        s.cnt1[v] = 0
        s.cnt2[v] = 0
    for v in range(n1):
        s.cnt1[s.lab1[v]] += 1
    for w in range(n2):
        s.cnt2[s.lab2[w]] += 1
    s.r1 = n1
    s.r2 = n2
    s.e1r = int(np.sum(s.deg1)) // 2 if n1 else 0
    s.e2r = int(np.sum(s.deg2)) // 2 if n2 else 0

    cdef double root_lb = s.bound()
    if root_lb < init_ub - TOL:
        s.expand(0, 0.0, root_lb)
    best = [s.best[v] for v in range(n1)] if s.have_best else None
    if not s.aborted:
        if not s.have_best:
            return max(root_lb, init_ub), INFINITY, None, s.expansions, True, s.trace
        return s.ub, s.ub, best, s.expansions, True, s.trace
    lower = max(root_lb, min(s.ub, s.open_min))
    upper = s.ub if s.have_best else INFINITY
    return lower, upper, best, s.expansions, False, s.trace
