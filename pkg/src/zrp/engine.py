"""Event-driven simulation engine.

Wires a model together with one of the two interchangeable kernels
(compiled, pure Python) behind a common Simulator facade. Backend choice:
ZRP_BACKEND=py|c wins, else compiled if it imported, else pure Python.
"""

import os
import struct

import numpy as np

from . import model
from .equilibrium import sample_occupancy_field
from .rng import Xoshiro256PP, derive_state

try:
    from . import _kernel_c
    _HAVE_C = True
except ImportError:
    _kernel_c = None
    _HAVE_C = False

from . import _kernel_py

OK = _kernel_py.OK
STALLED = _kernel_py.STALLED
MAXED = _kernel_py.MAXED
FIRED = _kernel_py.FIRED

_MAGIC = b"ZRPC"
_CKPT_VERSION = 1


class StallError(RuntimeError):
    """Total jump rate hit zero with simulation time still to cover."""


def get_backend(name=None):
    """Resolve a kernel module by name, env override, or availability."""
    if name is None:
        name = os.environ.get("ZRP_BACKEND")
    if name in (None, "", "auto"):
        return _kernel_c if _HAVE_C else _kernel_py
    if name == "c":
        if not _HAVE_C:
            raise RuntimeError("compiled kernel unavailable; rebuild or use ZRP_BACKEND=py")
        return _kernel_c
    if name == "py":
        return _kernel_py
    raise ValueError("unknown backend %r" % (name,))


class DisplacementSampler:
    """Alias-method sampler over the torus jump displacements.

    Categories are all n_sites-1 nonzero displacement classes, weighted by
    the minimal-image kernel; construction is deterministic so every
    process builds the identical table.
    """

    def __init__(self, spec):
        shifts, images = spec.geometry.displacements()
        w = model.torus_kernel_weights(spec)
        self.S = float(w.sum())
        self.disp = np.ascontiguousarray(images, dtype=np.int64)
        self.n = w.size
        p = w / self.S
        scaled = p * self.n
        prob = np.ones(self.n)
        alias = np.arange(self.n, dtype=np.int32)
        small = [i for i in range(self.n) if scaled[i] < 1.0]
        large = [i for i in range(self.n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        for i in small:
            prob[i] = 1.0
        for i in large:
            prob[i] = 1.0
        self.prob = prob
        self.alias = alias

    def sample_index(self, u):
        """Map one uniform to a displacement row (same arithmetic as kernels)."""
        x = u * self.n
        j = int(x)
        if j >= self.n:
            j = self.n - 1
        if x - j >= self.prob[j]:
            j = self.alias[j]
        return j


def equilibrium_start(spec, profile, master_seed, replica):
    """Draw the replica's initial field and return it with the generator
    state left over for the dynamics. One xoshiro stream per replica: the
    first L^d doubles fix the configuration, the rest drive the events."""
    state = derive_state(master_seed, replica)
    rng = Xoshiro256PP(state)
    occ = sample_occupancy_field(rng, spec, profile)
    return occ, rng.state


class Simulator:
    """One replica's dynamics: occupancies plus a kernel instance."""

    def __init__(self, spec, occ, state, backend=None, force_fenwick=False,
                 sim_time=0.0):
        occ = np.ascontiguousarray(occ, dtype=np.int32)
        if occ.size != spec.geometry.n_sites:
            raise ValueError("occupancy length %d != n_sites %d"
                             % (occ.size, spec.geometry.n_sites))
        if (occ < 0).any():
            raise ValueError("negative occupancy")
        self.spec = spec
        self.sampler = DisplacementSampler(spec)
        self.total = int(occ.sum())
        self.ctab = spec.rate_family.rate_table(self.total + 1)
        linear = (spec.rate_family.kind == "linear") and not force_fenwick
        mod = get_backend(backend)
        self.backend = mod.BACKEND
        self.kernel = mod.EventKernel(
            spec.d, spec.L, occ, self.ctab, self.sampler.S,
            self.sampler.prob, self.sampler.alias, self.sampler.disp,
            linear, spec.rate_family.a, state, 0)
        if sim_time:
            self.kernel.t = sim_time
        self._zero_vtab = np.zeros(self.total + 1)
        self._no_watch = np.zeros(0, dtype=np.int64)

    @property
    def occupancy(self):
        return np.asarray(self.kernel.occupancy)

    @property
    def sim_time(self):
        return self.kernel.sim_time

    @property
    def events(self):
        return self.kernel.events

    def total_rate(self):
        return self.kernel.total_rate()

    def audit(self):
        """Relative drift of the cached rate sum against a fresh recompute."""
        cached, fresh = self.kernel.audit()
        scale = max(1.0, abs(fresh))
        return abs(cached - fresh) / scale

    def step(self):
        """Fire exactly one event; returns (dt, src, dst)."""
        status, dt, src, dst = self.kernel.step_one()
        if status == STALLED:
            raise StallError("total rate is zero at t=%g" % self.kernel.sim_time)
        return dt, src, dst

    def advance(self, t_end, max_events=0):
        """Run dynamics to t_end (no recording). Returns events fired."""
        t_end = float(t_end)
        if t_end < self.kernel.sim_time:
            raise ValueError("t_end %g behind sim_time %g" % (t_end, self.kernel.sim_time))
        before = self.kernel.events
        grid = np.array([t_end])
        out_A = np.zeros(1)
        status, _ = self.kernel.run(t_end, grid, self._zero_vtab,
                                    self._no_watch, out_A, None, max_events)
        if status == STALLED:
            raise StallError("total rate is zero at t=%g" % self.kernel.sim_time)
        return self.kernel.events - before

    def advance_until(self, t_end, observer=None):
        """Run to t_end, reporting each inter-event interval to observer as
        observer(elapsed, src, dst); the final partial interval gets
        src = dst = -1. State queried inside the callback is post-event."""
        t_end = float(t_end)
        if t_end < self.kernel.sim_time:
            raise ValueError("t_end %g behind sim_time %g" % (t_end, self.kernel.sim_time))
        fired = 0
        while True:
            prev = self.kernel.sim_time
            status, dt, src, dst = self.kernel.step_one(t_end)
            if status == STALLED:
                raise StallError("total rate is zero at t=%g" % prev)
            elapsed = self.kernel.sim_time - prev
            if observer is not None:
                observer(elapsed, src, dst)
            if status == OK:
                return fired
            fired += 1

    def run_recording(self, t_end, grid, vtab, watch, out_A, out_v=None,
                      max_events=0):
        """Kernel-resident recording pass; see kernel run() contract."""
        status, emitted = self.kernel.run(
            float(t_end), np.ascontiguousarray(grid, dtype=np.float64),
            np.ascontiguousarray(vtab, dtype=np.float64),
            np.ascontiguousarray(watch, dtype=np.int64),
            out_A, out_v, max_events)
        if status == STALLED:
            raise StallError("total rate is zero at t=%g" % self.kernel.sim_time)
        return status, emitted


def save_checkpoint(path, spec, occ, sim_time):
    """Binary snapshot: magic, version, d, L, n_sites, total, time, field."""
    occ = np.ascontiguousarray(occ, dtype=np.int32)
    head = struct.pack("<4sBBIQQd", _MAGIC, _CKPT_VERSION, spec.d, spec.L,
                       occ.size, int(occ.sum()), float(sim_time))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(occ.astype("<i4").tobytes())


def load_checkpoint(path):
    """Returns (d, L, occ, sim_time); validates magic, version, and counts."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sBBIQQd")
    if len(blob) < head_size:
        raise ValueError("checkpoint truncated")
    magic, version, d, L, n_sites, total, sim_time = struct.unpack(
        "<4sBBIQQd", blob[:head_size])
    if magic != _MAGIC:
        raise ValueError("bad checkpoint magic %r" % (magic,))
    if version != _CKPT_VERSION:
        raise ValueError("unsupported checkpoint version %d" % version)
    occ = np.frombuffer(blob[head_size:], dtype="<i4").astype(np.int32)
    if occ.size != n_sites:
        raise ValueError("field length %d != header n_sites %d" % (occ.size, n_sites))
    if int(occ.sum()) != total:
        raise ValueError("particle count %d != header total %d" % (int(occ.sum()), total))
    if (occ < 0).any():
        raise ValueError("negative occupancy in checkpoint")
    return d, L, occ, float(sim_time)
