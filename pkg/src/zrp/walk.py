"""Single-particle walk analysis: lattice symbol, heat kernel, scalings.

The symbol phi(k) = sum_y (1 - cos k.y) |y|^-(d+alpha) is evaluated by
Ewald splitting: a direct-space sum screened by regularized upper
incomplete gammas plus a reciprocal-space sum of G(x) = x^(a) Gamma(-a, x)
terms, both truncated at lattice radius 6 where the screening factors are
~1e-30. Transition probabilities integrate exp(-t phi) over the Brillouin
zone with composite Gauss-Legendre panels, doubling panels until the
values settle.
"""

import math
from functools import lru_cache

import numpy as np
from scipy import special

from ._incgamma import g_upper_scaled
from . import limits

_EWALD_RADIUS = 6
_PANEL_NODES = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_PANEL_NODES)


@lru_cache(maxsize=32)
def _ewald_tables(d, alpha):
    """Precomputed lattice data for the symbol at (d, alpha)."""
    p = d + alpha
    rng = np.arange(-_EWALD_RADIUS, _EWALD_RADIUS + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, d).astype(float)
    r2 = np.sum(pts * pts, axis=1)
    nz = r2 > 0
    ypts = pts[nz]
    yr2 = r2[nz]
    # direct-space weights: |y|^-p Q(p/2, pi |y|^2)
    yw = yr2 ** (-0.5 * p) * special.gammaincc(0.5 * p, math.pi * yr2)
    front = math.pi ** (0.5 * p) / special.gamma(0.5 * p)
    g_const = float(np.sum(g_upper_scaled(0.5 * alpha, math.pi * r2)))
    return ypts, yw, pts, front, g_const


def symbol(k, d, alpha):
    """phi(k) for wavevectors k; accepts scalar (d=1) or (..., d) arrays."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    k = np.asarray(k, dtype=float)
    scalar = k.ndim == 0
    if d == 1:
        kk = np.atleast_1d(k).reshape(-1, 1)
    else:
        kk = k.reshape(-1, d)
        if kk.shape[-1] != d:
            raise ValueError("wavevector must have %d components" % d)
    ypts, yw, mpts, front, g_const = _ewald_tables(d, alpha)
    out = np.empty(kk.shape[0])
    block = max(1, 2 ** 22 // (mpts.shape[0] * 4))
    for lo in range(0, kk.shape[0], block):
        kb = kk[lo:lo + block]
        direct = ((1.0 - np.cos(kb @ ypts.T)) * yw).sum(axis=1)
        shift = mpts[None, :, :] - kb[:, None, :] / (2.0 * math.pi)
        sr2 = np.sum(shift * shift, axis=2)
        recip = g_upper_scaled(0.5 * alpha, math.pi * sr2).sum(axis=1)
        out[lo:lo + block] = direct + front * (g_const - recip)
    if scalar:
        return float(out[0])
    return out.reshape(k.shape if d == 1 else k.shape[:-1])


def _panel_nodes(n_panels):
    """Composite Gauss-Legendre rule for [0, pi] with n_panels panels."""
    edges = np.linspace(0.0, math.pi, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return u, w


def _heat_values_1d(t, x, alpha, tol, max_panels):
    x = np.abs(np.asarray(x, dtype=float))
    prev = None
    n_panels = 1
    while n_panels <= max_panels:
        u, w = _panel_nodes(n_panels)
        damp = w * np.exp(-t * symbol(u, 1, alpha))
        vals = np.empty(x.size)
        chunk = max(16, 2 ** 25 // max(1, u.size))
        for lo in range(0, x.size, chunk):
            vals[lo:lo + chunk] = np.cos(np.outer(x[lo:lo + chunk], u)) @ damp
        vals /= math.pi
        if prev is not None:
            err = float(np.max(np.abs(vals - prev)))
            if err <= tol:
                return vals, err
        prev = vals
        n_panels *= 2
    raise RuntimeError(
        "heat kernel quadrature did not reach %g (last change %g)"
        % (tol, err if prev is not None else float("nan")))


def _heat_values_2d(t, x1, x2, alpha, tol, max_panels):
    """p_t(0, (x1_i, x2_j)) for all grid pairs, by a cos-matrix sandwich."""
    x1 = np.abs(np.asarray(x1, dtype=float))
    x2 = np.abs(np.asarray(x2, dtype=float))
    prev = None
    n_panels = 1
    while n_panels <= max_panels:
        u, w = _panel_nodes(n_panels)
        K1, K2 = np.meshgrid(u, u, indexing="ij")
        kk = np.stack([K1.ravel(), K2.ravel()], axis=-1)
        M = np.exp(-t * symbol(kk, 2, alpha)).reshape(u.size, u.size)
        C1 = np.cos(np.outer(x1, u)) * w
        C2 = np.cos(np.outer(x2, u)) * w
        vals = (C1 @ M @ C2.T) / math.pi ** 2
        if prev is not None:
            err = float(np.max(np.abs(vals - prev)))
            if err <= tol:
                return vals, err
        prev = vals
        n_panels *= 2
    raise RuntimeError(
        "heat kernel quadrature did not reach %g (last change %g)"
        % (tol, err if prev is not None else float("nan")))


def transition_probability(t, x, d, alpha, tol=1e-10):
    """p_t(0, x) for the rate-one long-range walk started at the origin.

    x: integer site offsets, scalar or (n,) for d=1, (n, d) for d=2.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    x = np.asarray(x)
    scalar = x.ndim == 0 or (d == 2 and x.ndim == 1)
    if d == 1:
        xx = np.atleast_1d(x).astype(float)
    elif d == 2:
        xx = x.reshape(-1, 2).astype(float)
    else:
        raise ValueError("transition probabilities implemented for d in {1, 2}")
    if t == 0.0:
        if d == 1:
            vals = (xx == 0.0).astype(float)
        else:
            vals = np.all(xx == 0.0, axis=1).astype(float)
        return float(vals[0]) if scalar else vals
    if d == 1:
        vals, _ = _heat_values_1d(t, xx, alpha, tol, 2048)
        return float(vals[0]) if scalar else vals
    # d = 2: evaluate each requested point through the grid sandwich
    vals = np.empty(xx.shape[0])
    for i, (a, b) in enumerate(xx):
        m, _ = _heat_values_2d(t, [a], [b], alpha, tol, 16)
        vals[i] = m[0, 0]
    return float(vals[0]) if scalar else vals


def scaling_h(s, alpha):
    """The walk's spatial scale after time s."""
    if s <= 0:
        raise ValueError("time must be positive")
    if alpha < 2.0:
        return s ** (1.0 / alpha)
    if s <= 1.0:
        raise ValueError("log scaling needs s > 1")
    if alpha == 2.0:
        return math.sqrt(s * math.log(s))
    return math.sqrt(s)


def normalizer(N, d, alpha):
    """Lambda(N): the centered functional's scale at horizon N."""
    if N <= 1.0:
        raise ValueError("horizon must exceed 1")
    if d == 1:
        if alpha < 1.0:
            return math.sqrt(N)
        if alpha == 1.0:
            return math.sqrt(N * math.log(N))
        if alpha < 2.0:
            return N ** (1.0 - 0.5 / alpha)
        if alpha == 2.0:
            return N ** 0.75 * math.log(N) ** -0.25
        return N ** 0.75
    if d == 2:
        if alpha < 2.0:
            return math.sqrt(N)
        if alpha == 2.0:
            if math.log(N) <= 1.0:
                raise ValueError("loglog normalizer needs N > e")
            return math.sqrt(N * math.log(math.log(N)))
        return math.sqrt(N * math.log(N))
    return math.sqrt(N)


def lclt_discrepancy(s, d, alpha, span=8.0, tol=1e-10):
    """sup_x |h^d p_s(0,x) - f_1(x/h)| over |x|_inf <= span*h, plus the
    origin ratio h^d p_s(0,0) / f_1(0). Returns a dict."""
    h = scaling_h(s, alpha)
    f0 = limits.stable_density_at_origin(d, alpha)
    if d == 1:
        xs = np.arange(0, int(math.ceil(span * h)) + 1)
        p = transition_probability(s, xs, 1, alpha, tol=tol)
        f = limits.stable_density(xs / h, 1, alpha)
        disc = np.abs(h * p - f)
        i = int(np.argmax(disc))
        return dict(sup=float(disc[i]), at=int(xs[i]), h=h,
                    origin_ratio=float(h * p[0] / f0))
    if d == 2:
        n = int(math.ceil(span * h))
        xs = np.arange(0, n + 1)
        grid, _ = _heat_values_2d(s, xs, xs, alpha, tol, 16)
        R = np.hypot(xs[:, None], xs[None, :])
        f = limits.stable_density(R.ravel(), 2, alpha).reshape(R.shape)
        disc = np.abs(h * h * grid - f)
        i, j = np.unravel_index(int(np.argmax(disc)), disc.shape)
        return dict(sup=float(disc[i, j]), at=(int(xs[i]), int(xs[j])), h=h,
                    origin_ratio=float(h * h * grid[0, 0] / f0))
    raise ValueError("d must be 1 or 2")
