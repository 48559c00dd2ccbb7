"""Pure-Python event kernel: the bit-exact reference for the compiled one.

Every floating-point operation here is mirrored, in the same order, by
_kernel_c.pyx; the two backends must produce identical trajectories from
identical generator states. Keep the two files in lockstep.

Status codes returned by run/step_one: 0 reached t_end, 1 stalled (zero
total rate with time remaining), 2 max_events reached.
"""

import math

import numpy as np

from .rng import Xoshiro256PP

BACKEND = "py"

OK = 0
STALLED = 1
MAXED = 2
FIRED = 3

_REBUILD_EVERY = 1 << 24


class EventKernel:
    def __init__(self, d, L, occ, ctab, S, prob, alias, disp, linear, a, state, origin=0):
        self.d = int(d)
        self.L = int(L)
        self.occ = np.ascontiguousarray(occ, dtype=np.int32)
        self.n_sites = self.occ.size
        self.ctab = np.ascontiguousarray(ctab, dtype=np.float64)
        self.S = float(S)
        self.prob = np.ascontiguousarray(prob, dtype=np.float64)
        self.alias = np.ascontiguousarray(alias, dtype=np.int32)
        self.disp = np.ascontiguousarray(disp, dtype=np.int64)
        self.n_alias = self.prob.size
        self.linear = bool(linear)
        self.a = float(a)
        self.origin = int(origin)
        self.rng = Xoshiro256PP(state)
        self.t = 0.0
        self.tc = 0.0  # Kahan compensation on sim_time
        self.events = 0
        self.n_particles = int(self.occ.sum())
        if self.linear:
            psite = np.repeat(np.arange(self.n_sites, dtype=np.int64),
                              self.occ.astype(np.int64))
            self.psite = psite
        else:
            size = 1
            while size < self.n_sites:
                size *= 2
            self.fsize = size
            self.tree = np.zeros(size + 1)
            self._rebuild()

    # -- rate bookkeeping ------------------------------------------------

    def _rebuild(self):
        # sequential sums, mirrored exactly by the C loop
        total = 0.0
        for i in range(self.n_sites):
            total += self.ctab[self.occ[i]]
        self.total_c = total
        tree = self.tree
        tree[:] = 0.0
        for i in range(self.n_sites):
            tree[i + 1] = self.ctab[self.occ[i]]
        for i in range(1, self.fsize + 1):
            j = i + (i & -i)
            if j <= self.fsize:
                tree[j] += tree[i]

    def _fen_add(self, pos, delta):
        i = pos + 1
        tree = self.tree
        while i <= self.fsize:
            tree[i] += delta
            i += i & -i

    def _fen_find(self, target):
        # smallest site index with prefix sum exceeding target
        pos = 0
        rem = target
        bm = self.fsize
        tree = self.tree
        while bm:
            nxt = pos + bm
            if nxt <= self.fsize and tree[nxt] < rem:
                rem -= tree[nxt]
                pos = nxt
            bm >>= 1
        return pos

    def total_rate(self):
        if self.linear:
            return self.S * (self.a * self.n_particles)
        return self.S * self.total_c

    def audit(self):
        """(cached rate sum, sequential recomputation)."""
        total = 0.0
        for i in range(self.n_sites):
            total += self.ctab[self.occ[i]]
        cached = self.a * self.n_particles if self.linear else self.total_c
        return cached, total

    def rng_state(self):
        return self.rng.state

    @property
    def sim_time(self):
        return self.t

    @property
    def occupancy(self):
        return self.occ

    # -- event primitives --------------------------------------------------

    def _draw_source(self):
        u2 = self.rng.next_double()
        if self.linear:
            idx = int(u2 * self.n_particles)
            if idx >= self.n_particles:
                idx = self.n_particles - 1
            return self.psite[idx], idx
        target = u2 * self.total_c
        src = self._fen_find(target)
        if src >= self.n_sites:
            src = self.n_sites - 1
        while self.occ[src] == 0:  # float-drift guard, vanishing probability
            src += 1
            if src == self.n_sites:
                src = 0
        return src, -1

    def _draw_dest(self, src):
        u3 = self.rng.next_double()
        x = u3 * self.n_alias
        j = int(x)
        if j >= self.n_alias:
            j = self.n_alias - 1
        if x - j >= self.prob[j]:
            j = self.alias[j]
        if self.d == 1:
            dst = src + self.disp[j, 0]
            if dst >= self.n_sites:
                dst -= self.n_sites
            elif dst < 0:
                dst += self.n_sites
            return int(dst)
        rem = src
        dst = 0
        mult = 1
        L = self.L
        for ax in range(self.d - 1, -1, -1):
            cj = rem % L
            rem //= L
            cj += self.disp[j, ax]
            if cj >= L:
                cj -= L
            elif cj < 0:
                cj += L
            dst += cj * mult
            mult *= L
        return int(dst)

    def _apply(self, src, pidx, dst):
        occ = self.occ
        ks = occ[src]
        kd = occ[dst]
        if self.linear:
            self.psite[pidx] = dst
        else:
            dsrc = self.ctab[ks - 1] - self.ctab[ks]
            ddst = self.ctab[kd + 1] - self.ctab[kd]
            self._fen_add(src, dsrc)
            self._fen_add(dst, ddst)
            self.total_c += dsrc
            self.total_c += ddst
        occ[src] = ks - 1
        occ[dst] = kd + 1
        self.events += 1
        if not self.linear and self.events % _REBUILD_EVERY == 0:
            self._rebuild()

    def step_one(self, t_cap=math.inf):
        """Fire one event (or truncate at t_cap); returns (status, dt, src, dst)."""
        rate = self.total_rate()
        if rate <= 0.0:
            return STALLED, 0.0, -1, -1
        u1 = self.rng.next_double()
        e = -math.log(1.0 - u1)
        dt = e / rate
        y = dt - self.tc
        t_new = self.t + y
        if t_new > t_cap:
            self.t = t_cap
            self.tc = 0.0
            return OK, t_cap, -1, -1
        self.tc = (t_new - self.t) - y
        self.t = t_new
        src, pidx = self._draw_source()
        dst = self._draw_dest(src)
        self._apply(src, pidx, dst)
        return FIRED, dt, int(src), int(dst)

    # -- bulk driver -------------------------------------------------------

    def run(self, t_end, grid, vtab, watch, out_A, out_v=None, max_events=0):
        """Advance to t_end, accumulating A = int V dt exactly and emitting
        A and the watched-site V values at every grid time. grid must be
        increasing with last entry == t_end; A continues from out_A_start=0."""
        occ = self.occ
        vtab = np.ascontiguousarray(vtab, dtype=np.float64)
        watch = np.ascontiguousarray(watch, dtype=np.int64)
        n_grid = grid.size
        g = 0
        A = 0.0
        ac = 0.0
        v_cur = vtab[occ[self.origin]]
        while True:
            rate = self.total_rate()
            if rate <= 0.0:
                if self.t >= t_end:
                    break
                return STALLED, g
            u1 = self.rng.next_double()
            e = -math.log(1.0 - u1)
            dt = e / rate
            y = dt - self.tc
            t_new = self.t + y
            if t_new > t_end:
                break
            while g < n_grid and grid[g] < t_new:
                out_A[g] = A + v_cur * (grid[g] - self.t)
                if out_v is not None:
                    for i in range(watch.size):
                        out_v[i, g] = vtab[occ[watch[i]]]
                g += 1
            self.tc = (t_new - self.t) - y
            self.t = t_new
            w = v_cur * dt
            ya = w - ac
            A_new = A + ya
            ac = (A_new - A) - ya
            A = A_new
            src, pidx = self._draw_source()
            dst = self._draw_dest(src)
            self._apply(src, pidx, dst)
            if src == self.origin or dst == self.origin:
                v_cur = vtab[occ[self.origin]]
            if max_events and self.events >= max_events:
                return MAXED, g
        # drain: no event in (t, t_end]; state is constant there
        while g < n_grid:
            out_A[g] = A + v_cur * (grid[g] - self.t)
            if out_v is not None:
                for i in range(watch.size):
                    out_v[i, g] = vtab[occ[watch[i]]]
            g += 1
        w = v_cur * (t_end - self.t)
        ya = w - ac
        A_new = A + ya
        ac = (A_new - A) - ya
        A = A_new
        self.tc = 0.0
        self.t = t_end
        return OK, n_grid
