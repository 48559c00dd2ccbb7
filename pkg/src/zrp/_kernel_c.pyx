# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event kernel. Mirrors _kernel_py.py operation for operation;
both backends must emit bit-identical trajectories from the same seed.
Build flags pin -ffp-contract=off so no FMA contraction sneaks in."""

from libc.math cimport log
from libc.stdint cimport uint64_t, int32_t, int64_t

import numpy as np

BACKEND = "c"

OK = 0
STALLED = 1
MAXED = 2
FIRED = 3

cdef double _INV53 = 1.0 / 9007199254740992.0
cdef long long _REBUILD_EVERY = 1 << 24


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef class EventKernel:
    cdef public int d, L
    cdef public long long n_sites, n_particles, n_alias, origin, events, fsize
    cdef public double S, a, t, tc, total_c
    cdef public bint linear
    cdef int32_t[::1] occ
    cdef double[::1] ctab
    cdef double[::1] prob
    cdef int32_t[::1] alias
    cdef int64_t[:, ::1] disp
    cdef int64_t[::1] psite
    cdef double[::1] tree
    cdef uint64_t s0, s1, s2, s3

    def __init__(self, d, L, occ, ctab, S, prob, alias, disp, linear, a, state, origin=0):
        self.d = d
        self.L = L
        occ = np.ascontiguousarray(occ, dtype=np.int32)
        self.occ = occ
        self.n_sites = occ.size
        self.ctab = np.ascontiguousarray(ctab, dtype=np.float64)
        self.S = S
        self.prob = np.ascontiguousarray(prob, dtype=np.float64)
        self.alias = np.ascontiguousarray(alias, dtype=np.int32)
        self.disp = np.ascontiguousarray(disp, dtype=np.int64)
        self.n_alias = self.prob.shape[0]
        self.linear = linear
        self.a = a
        self.origin = origin
        self.s0, self.s1, self.s2, self.s3 = state
        self.t = 0.0
        self.tc = 0.0
        self.events = 0
        self.n_particles = int(occ.sum())
        if self.linear:
            self.psite = np.repeat(np.arange(self.n_sites, dtype=np.int64),
                                   occ.astype(np.int64))
            self.tree = np.zeros(1)
            self.fsize = 0
        else:
            size = 1
            while size < self.n_sites:
                size *= 2
            self.fsize = size
            self.tree = np.zeros(size + 1)
            self.psite = np.zeros(1, dtype=np.int64)
            self._rebuild()

    cdef double _next_double(self) nogil:
        cdef uint64_t tmp = self.s0 + self.s3
        cdef uint64_t result = _rotl(tmp, 23) + self.s0
        cdef uint64_t t = self.s1 << 17
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return <double>(result >> 11) * _INV53

    # -- rate bookkeeping ------------------------------------------------

    cdef void _rebuild(self):
        cdef long long i, j
        cdef double total = 0.0
        for i in range(self.n_sites):
            total += self.ctab[self.occ[i]]
        self.total_c = total
        for i in range(self.fsize + 1):
            self.tree[i] = 0.0
        for i in range(self.n_sites):
            self.tree[i + 1] = self.ctab[self.occ[i]]
        for i in range(1, self.fsize + 1):
            j = i + (i & -i)
            if j <= self.fsize:
                self.tree[j] += self.tree[i]

    cdef inline void _fen_add(self, long long pos, double delta) nogil:
        cdef long long i = pos + 1
        while i <= self.fsize:
            self.tree[i] += delta
            i += i & -i

    cdef inline long long _fen_find(self, double target) nogil:
        cdef long long pos = 0
        cdef long long bm = self.fsize
        cdef long long nxt
        cdef double rem = target
        while bm:
            nxt = pos + bm
            if nxt <= self.fsize and self.tree[nxt] < rem:
                rem -= self.tree[nxt]
                pos = nxt
            bm >>= 1
        return pos

    def total_rate(self):
        if self.linear:
            return self.S * (self.a * self.n_particles)
        return self.S * self.total_c

    def audit(self):
        """(cached rate sum, sequential recomputation)."""
        cdef long long i
        cdef double total = 0.0
        for i in range(self.n_sites):
            total += self.ctab[self.occ[i]]
        cached = self.a * self.n_particles if self.linear else self.total_c
        return cached, total

    def rng_state(self):
        return (self.s0, self.s1, self.s2, self.s3)

    @property
    def sim_time(self):
        return self.t

    @property
    def occupancy(self):
        return np.asarray(self.occ)

    # -- event primitives --------------------------------------------------

    cdef inline long long _source(self, long long* pidx_out) nogil:
        cdef double u2 = self._next_double()
        cdef long long idx, src
        cdef double target
        if self.linear:
            idx = <long long>(u2 * <double>self.n_particles)
            if idx >= self.n_particles:
                idx = self.n_particles - 1
            pidx_out[0] = idx
            return self.psite[idx]
        target = u2 * self.total_c
        src = self._fen_find(target)
        if src >= self.n_sites:
            src = self.n_sites - 1
        while self.occ[src] == 0:
            src += 1
            if src == self.n_sites:
                src = 0
        pidx_out[0] = -1
        return src

    cdef inline long long _dest(self, long long src) nogil:
        cdef double u3 = self._next_double()
        cdef double x = u3 * <double>self.n_alias
        cdef long long j = <long long>x
        cdef long long dst, rem, mult, cj
        cdef int ax
        if j >= self.n_alias:
            j = self.n_alias - 1
        if x - <double>j >= self.prob[j]:
            j = self.alias[j]
        if self.d == 1:
            dst = src + self.disp[j, 0]
            if dst >= self.n_sites:
                dst -= self.n_sites
            elif dst < 0:
                dst += self.n_sites
            return dst
        rem = src
        dst = 0
        mult = 1
        for ax in range(self.d - 1, -1, -1):
            cj = rem % self.L
            rem //= self.L
            cj += self.disp[j, ax]
            if cj >= self.L:
                cj -= self.L
            elif cj < 0:
                cj += self.L
            dst += cj * mult
            mult *= self.L
        return dst

    cdef inline void _apply(self, long long src, long long pidx, long long dst):
        cdef int32_t ks = self.occ[src]
        cdef int32_t kd = self.occ[dst]
        cdef double dsrc, ddst
        if self.linear:
            self.psite[pidx] = dst
        else:
            dsrc = self.ctab[ks - 1] - self.ctab[ks]
            ddst = self.ctab[kd + 1] - self.ctab[kd]
            self._fen_add(src, dsrc)
            self._fen_add(dst, ddst)
            self.total_c += dsrc
            self.total_c += ddst
        self.occ[src] = ks - 1
        self.occ[dst] = kd + 1
        self.events += 1
        if (not self.linear) and self.events % _REBUILD_EVERY == 0:
            self._rebuild()

    def step_one(self, double t_cap=float("inf")):
        """Fire one event (or truncate at t_cap); returns (status, dt, src, dst)."""
        cdef double rate, u1, e, dt, y, t_new
        cdef long long src, dst, pidx
        if self.linear:
            rate = self.S * (self.a * self.n_particles)
        else:
            rate = self.S * self.total_c
        if rate <= 0.0:
            return STALLED, 0.0, -1, -1
        u1 = self._next_double()
        e = -log(1.0 - u1)
        dt = e / rate
        y = dt - self.tc
        t_new = self.t + y
        if t_new > t_cap:
            self.t = t_cap
            self.tc = 0.0
            return OK, t_cap, -1, -1
        self.tc = (t_new - self.t) - y
        self.t = t_new
        src = self._source(&pidx)
        dst = self._dest(src)
        self._apply(src, pidx, dst)
        return FIRED, dt, src, dst

    # -- bulk driver -------------------------------------------------------

    def run(self, double t_end, double[::1] grid, double[::1] vtab,
            int64_t[::1] watch, double[::1] out_A, out_v=None,
            long long max_events=0):
        """Advance to t_end; emit running integral A and watched-site V
        values at each grid time. grid increasing, last entry == t_end."""
        cdef long long n_grid = grid.shape[0]
        cdef long long g = 0
        cdef double A = 0.0
        cdef double ac = 0.0
        cdef double v_cur, rate, u1, e, dt, y, t_new, w, ya, A_new
        cdef long long src, dst, pidx, i
        cdef long long n_watch = watch.shape[0]
        cdef double[:, ::1] vout = None
        cdef bint have_v = out_v is not None
        if have_v:
            vout = out_v
        v_cur = vtab[self.occ[self.origin]]
        while True:
            if self.linear:
                rate = self.S * (self.a * self.n_particles)
            else:
                rate = self.S * self.total_c
            if rate <= 0.0:
                if self.t >= t_end:
                    break
                return STALLED, g
            u1 = self._next_double()
            e = -log(1.0 - u1)
            dt = e / rate
            y = dt - self.tc
            t_new = self.t + y
            if t_new > t_end:
                break
            while g < n_grid and grid[g] < t_new:
                out_A[g] = A + v_cur * (grid[g] - self.t)
                if have_v:
                    for i in range(n_watch):
                        vout[i, g] = vtab[self.occ[watch[i]]]
                g += 1
            self.tc = (t_new - self.t) - y
            self.t = t_new
            w = v_cur * dt
            ya = w - ac
            A_new = A + ya
            ac = (A_new - A) - ya
            A = A_new
            src = self._source(&pidx)
            dst = self._dest(src)
            self._apply(src, pidx, dst)
            if src == self.origin or dst == self.origin:
                v_cur = vtab[self.occ[self.origin]]
            if max_events and self.events >= max_events:
                return MAXED, g
        while g < n_grid:
            out_A[g] = A + v_cur * (grid[g] - self.t)
            if have_v:
                for i in range(n_watch):
                    vout[i, g] = vtab[self.occ[watch[i]]]
            g += 1
        w = v_cur * (t_end - self.t)
        ya = w - ac
        A_new = A + ya
        ac = (A_new - A) - ya
        A = A_new
        self.tc = 0.0
        self.t = t_end
        return OK, n_grid
