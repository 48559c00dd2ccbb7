"""Additive-functional recording along a simulated trajectory.

A(t) = integral of V(shifted field) ds is accumulated exactly between
events (V is piecewise constant), with Kahan compensation, and emitted at
caller-chosen grid times. Tabulated single-site observables ride inside
the kernel loop; windowed observables use a Python loop with cached
window values refreshed only when an event touches them.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernel_py
from .observables import evaluate_observable, value_table

OK = _kernel_py.OK
STALLED = _kernel_py.STALLED


@dataclass
class FunctionalPath:
    """Recorded functional: A(grid) plus optional watched-site V series."""

    grid: np.ndarray
    A: np.ndarray
    v: np.ndarray = None
    watch: tuple = ()
    events: int = 0
    t_end: float = 0.0
    backend: str = ""
    meta: dict = field(default_factory=dict)


def _check_grid(grid, t0):
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty recording grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < t0:
        raise ValueError("grid starts at %g before sim_time %g" % (grid[0], t0))
    return grid


def record_functional(sim, profile, obs, grid, watch=()):
    """Advance sim to grid[-1], recording A and per-watch-site V values.

    Returns a FunctionalPath; sim is left at t_end. Tabulated observables
    (occupation, rate_centered) run inside the kernel; window observables
    take the event-by-event path.
    """
    grid = _check_grid(grid, sim.sim_time)
    t_end = float(grid[-1])
    watch = tuple(int(w) for w in watch)
    if obs.kind in ("occupation", "rate_centered"):
        return _record_table_path(sim, profile, obs, grid, watch, t_end)
    return _record_window_path(sim, profile, obs, grid, watch, t_end)


def _record_table_path(sim, profile, obs, grid, watch, t_end):
    vtab = value_table(obs, profile, sim.total)
    out_A = np.zeros(grid.size)
    out_v = np.zeros((len(watch), grid.size)) if watch else None
    warr = np.asarray(watch, dtype=np.int64)
    e0 = sim.events
    sim.run_recording(t_end, grid, vtab, warr, out_A, out_v)
    return FunctionalPath(grid=grid, A=out_A, v=out_v, watch=watch,
                          events=sim.events - e0, t_end=t_end,
                          backend=sim.backend)


class _WindowCache:
    """V values for a set of centers, refreshed when an event lands in
    any center's observation window."""

    def __init__(self, sim, profile, obs, centers):
        self.obs = obs
        self.profile = profile
        geom = sim.spec.geometry
        occ = sim.occupancy
        self.occ = occ
        self.centers = list(centers)
        self.windows = []    # per center: site indices in offsets order
        self.values = np.zeros(len(self.centers))
        touch = {}
        for ci, c in enumerate(self.centers):
            base = geom.coords_of(c)
            sites = []
            for off in obs.offsets:
                pos = (base + np.asarray(off)) % sim.spec.L
                s = int(geom.site_of(pos))
                sites.append(s)
                touch.setdefault(s, []).append(ci)
            self.windows.append(np.asarray(sites, dtype=np.int64))
            self.values[ci] = evaluate_observable(obs, occ[self.windows[ci]], profile)
        self.touch = touch

    def refresh(self, site):
        for ci in self.touch.get(site, ()):
            w = self.windows[ci]
            self.values[ci] = evaluate_observable(self.obs, self.occ[w], self.profile)


def _record_window_path(sim, profile, obs, grid, watch, t_end):
    """Event-by-event recording; mirrors the kernel accumulation ops so a
    tabulated observable pushed through this path matches bit for bit."""
    kernel = sim.kernel
    cache = _WindowCache(sim, profile, obs, (0,) + tuple(watch))
    n_grid = grid.size
    out_A = np.zeros(n_grid)
    out_v = np.zeros((len(watch), n_grid)) if watch else None
    g = 0
    A = 0.0
    ac = 0.0
    e0 = sim.events
    while True:
        t_prev = kernel.sim_time
        v_cur = cache.values[0]
        status, dt, src, dst = kernel.step_one(t_end)
        if status == STALLED:
            raise_stall(sim)
        if status == OK:
            while g < n_grid:
                out_A[g] = A + v_cur * (grid[g] - t_prev)
                if out_v is not None:
                    out_v[:, g] = cache.values[1:]
                g += 1
            w = v_cur * (t_end - t_prev)
            ya = w - ac
            A_new = A + ya
            ac = (A_new - A) - ya
            A = A_new
            break
        t_new = kernel.sim_time
        while g < n_grid and grid[g] < t_new:
            out_A[g] = A + v_cur * (grid[g] - t_prev)
            if out_v is not None:
                out_v[:, g] = cache.values[1:]
            g += 1
        w = v_cur * dt
        ya = w - ac
        A_new = A + ya
        ac = (A_new - A) - ya
        A = A_new
        cache.refresh(src)
        cache.refresh(dst)
    return FunctionalPath(grid=grid, A=out_A, v=out_v, watch=watch,
                          events=sim.events - e0, t_end=t_end,
                          backend=sim.backend)


def raise_stall(sim):
    from .engine import StallError
    raise StallError("total rate is zero at t=%g" % sim.sim_time)
