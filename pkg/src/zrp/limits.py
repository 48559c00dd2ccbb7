"""Limit-theory constants: stable densities, scaling regimes, fBm tools.

Every constant ships with two independent computation routes (gamma-function
algebra vs direct quadrature/lattice sums) so the verify pass can demand
agreement instead of trusting a transcription.
"""

import math

import numpy as np
from scipy import integrate, special

from . import model
from .observables import vbar_prime_of


def weight_c(d, alpha, method="closed"):
    """Coefficient c with symbol(k) ~ c |k|^alpha as k -> 0 (alpha < 2).

    c = int (1 - cos(e.x)) |x|^(-d-alpha) dx over R^d.
    """
    if not 0 < alpha < 2:
        raise ValueError("weight_c needs 0 < alpha < 2")
    if method == "closed":
        if d == 1:
            return math.pi / (special.gamma(1.0 + alpha) * math.sin(0.5 * math.pi * alpha))
        if d == 2:
            return (2.0 * math.pi * 2.0 ** (-alpha) * special.gamma(1.0 - 0.5 * alpha)
                    / (alpha * special.gamma(1.0 + 0.5 * alpha)))
        raise ValueError("closed form tabulated for d in {1, 2}")
    if method != "quad":
        raise ValueError("method must be closed or quad")
    if d == 1:
        # 1-cos u written as 2 sin^2(u/2): no cancellation near zero
        head = integrate.quad(lambda u: 4.0 * math.sin(0.5 * u) ** 2 * u ** (-1.0 - alpha),
                              0.0, 1.0, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
        plain = 2.0 / alpha  # int_1^inf 2 u^{-1-a} du
        osc = integrate.quad(lambda u: 2.0 * u ** (-1.0 - alpha), 1.0, np.inf,
                             weight="cos", wvar=1.0, epsabs=1e-12, limit=400)[0]
        return head + plain - osc
    if d == 2:
        def one_minus_j0(u):
            if u < 0.25:
                q = 0.25 * u * u
                return q - q * q / 4.0 + q ** 3 / 36.0 - q ** 4 / 576.0 + q ** 5 / 14400.0
            return 1.0 - special.j0(u)

        val = integrate.quad(lambda u: one_minus_j0(u) * u ** (-1.0 - alpha),
                             0.0, 60.0, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
        # beyond the cutoff the plain power integrates exactly and the
        # J0 leftover gets its own oscillatory pass
        tail = 60.0 ** (-alpha) / alpha
        osc = integrate.quad(lambda u: special.j0(u) * u ** (-1.0 - alpha),
                             60.0, 1e4, epsabs=1e-13, limit=4000)[0]
        return 2.0 * math.pi * (val + tail - osc)
    raise ValueError("d must be 1 or 2 for quadrature route")


def gaussian_scale(d, alpha, method="closed"):
    """Covariance of the limiting normal when alpha = 2 (slowly varying
    normalization) or alpha > 2 (finite-variance walk): a d x d matrix."""
    if alpha == 2.0:
        if d == 1:
            return np.array([[1.0]])
        if d == 2:
            return 0.5 * math.pi * np.eye(2)
        raise ValueError("alpha = 2 scale tabulated for d in {1, 2}")
    if alpha <= 2.0:
        raise ValueError("gaussian_scale needs alpha >= 2")
    return model.second_moment_matrix(
        d, alpha, method="closed" if method == "closed" else "direct")


def stable_density_at_origin(d, alpha, method="closed"):
    """f_1(0) for the walk's scaling limit at time 1.

    alpha < 2: symmetric alpha-stable with multiplier weight_c.
    alpha = 2: normal with the slowly-varying-normalized covariance.
    alpha > 2: normal with the full jump second-moment matrix.
    """
    if alpha < 2.0:
        c = weight_c(d, alpha, method=method)
        if method == "closed":
            if d == 1:
                return special.gamma(1.0 + 1.0 / alpha) / (math.pi * c ** (1.0 / alpha))
            if d == 2:
                return special.gamma(2.0 / alpha) / (2.0 * math.pi * alpha * c ** (2.0 / alpha))
            raise ValueError("d must be 1 or 2")
        # independent route: integrate the characteristic function
        if d == 1:
            val = integrate.quad(lambda k: math.exp(-c * k ** alpha), 0.0, np.inf,
                                 epsabs=1e-14)[0]
            return val / math.pi
        if d == 2:
            val = integrate.quad(lambda r: r * math.exp(-c * r ** alpha), 0.0, np.inf,
                                 epsabs=1e-14)[0]
            return val / (2.0 * math.pi)
        raise ValueError("d must be 1 or 2")
    A = gaussian_scale(d, alpha, method=method)
    if method == "closed":
        return float((2.0 * math.pi) ** (-0.5 * d) / math.sqrt(np.linalg.det(A)))
    # quadrature of the normal characteristic function, axis by axis; the
    # lattice symmetry makes A diagonal in the tabulated dimensions
    if not np.allclose(A, np.diag(np.diag(A)), atol=1e-12):
        raise ValueError("quadrature route expects a diagonal scale matrix")
    out = 1.0
    for i in range(d):
        aii = float(A[i, i])
        out *= integrate.quad(lambda k: math.exp(-0.5 * aii * k * k),
                              -np.inf, np.inf, epsabs=1e-14)[0] / (2.0 * math.pi)
    return out


def stable_density(z, d, alpha):
    """Limit density f_1 evaluated off the origin (vectorized over z).

    d = 1 takes scalar/array z; d = 2 takes the radius |z|.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if alpha < 2.0:
        c = weight_c(d, alpha)
        u_max = (18.0 * math.log(10.0) / c) ** (1.0 / alpha)
        n = 4096
        u, w = np.polynomial.legendre.leggauss(n)
        u = 0.5 * u_max * (u + 1.0)
        w = 0.5 * u_max * w
        damp = np.exp(-c * u ** alpha)
        if d == 1:
            vals = (np.cos(np.outer(z, u)) * (w * damp)).sum(axis=1) / math.pi
        elif d == 2:
            vals = (special.j0(np.outer(z, u)) * (w * damp * u)).sum(axis=1) / (2.0 * math.pi)
        else:
            raise ValueError("d must be 1 or 2")
        return vals if vals.size > 1 else float(vals[0])
    A = gaussian_scale(d, alpha)
    if d == 1:
        s2 = float(A[0, 0])
        vals = np.exp(-0.5 * z * z / s2) / math.sqrt(2.0 * math.pi * s2)
    else:
        # isotropic evaluation by radius; valid for the diagonal scales here
        s2 = float(A[0, 0])
        vals = np.exp(-0.5 * z * z / s2) / (2.0 * math.pi * s2)
    return vals if vals.size > 1 else float(vals[0])


def finite_variance_regime(d, alpha):
    """Whether the time-integrated observable has a diffusive (Brownian)
    limit with a finite integrated autocovariance."""
    if d == 1:
        return alpha < 1.0
    if d == 2:
        return alpha < 2.0
    return True


def limit_law_coefficient(d, alpha, profile, obs):
    """Scaling regime for A(N): Hurst-type exponent theta, the closed-form
    sigma where the theory pins it (None means: measure it), and the name
    of the normalizer family Lambda(N).

    Returns dict(theta, sigma, normalizer, regime, limit).
    """
    vp = vbar_prime_of(obs, profile)
    beta = profile.beta
    bp = profile.beta_prime
    if d == 1:
        if alpha < 1.0:
            return dict(theta=0.5, sigma=None, normalizer="sqrt",
                        regime="diffusive", limit="brownian")
        if alpha == 1.0:
            f0 = stable_density_at_origin(1, 1.0)
            sig = math.sqrt(2.0 * f0 * (vp / bp) ** 2 * beta)
            return dict(theta=0.5, sigma=sig, normalizer="sqrt_log",
                        regime="marginal", limit="brownian")
        if alpha < 2.0:
            f0 = stable_density_at_origin(1, alpha)
            s2 = (2.0 * alpha ** 2 / ((alpha - 1.0) * (2.0 * alpha - 1.0))
                  * vp ** 2 * beta * bp ** (-1.0 - 1.0 / alpha) * f0)
            return dict(theta=1.0 - 0.5 / alpha, sigma=math.sqrt(s2),
                        normalizer="power", regime="superdiffusive",
                        limit="fbm")
        f0 = stable_density_at_origin(1, alpha)
        s2 = (8.0 / 3.0) * vp ** 2 * beta * bp ** (-1.5) * f0
        if alpha == 2.0:
            return dict(theta=0.75, sigma=math.sqrt(s2),
                        normalizer="power_logcorr", regime="superdiffusive",
                        limit="fbm")
        return dict(theta=0.75, sigma=math.sqrt(s2), normalizer="power",
                    regime="superdiffusive", limit="fbm")
    if d == 2:
        if alpha < 2.0:
            return dict(theta=0.5, sigma=None, normalizer="sqrt",
                        regime="diffusive", limit="brownian")
        f0 = stable_density_at_origin(2, alpha)
        sig = math.sqrt(2.0 * f0 * (vp / bp) ** 2 * beta)
        if alpha == 2.0:
            return dict(theta=0.5, sigma=sig, normalizer="sqrt_loglog",
                        regime="marginal", limit="brownian")
        return dict(theta=0.5, sigma=sig, normalizer="sqrt_log",
                    regime="marginal", limit="brownian")
    return dict(theta=0.5, sigma=None, normalizer="sqrt",
                regime="diffusive", limit="brownian")


def relaxation_constant(d, alpha, profile, obs):
    """Prefactor of the t^(-d/min(2,alpha)) variance decay of the
    semigroup-evolved observable at equilibrium."""
    vp = vbar_prime_of(obs, profile)
    var_occ = profile.var_occ
    f0 = stable_density_at_origin(d, alpha)
    expo = d / min(2.0, alpha)
    return vp ** 2 * var_occ * f0 / (2.0 * profile.beta_prime) ** expo


def fbm_covariance(theta, s, t):
    """Cov of fractional Brownian motion with Hurst index theta at (s, t)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if theta <= 0.0 or theta >= 1.0:
        raise ValueError("Hurst index must lie in (0, 1)")
    out = 0.5 * (np.abs(s) ** (2 * theta) + np.abs(t) ** (2 * theta)
                 - np.abs(t - s) ** (2 * theta))
    return out if out.ndim else float(out)


def sample_fbm(theta, grid, n_paths, seed):
    """Exact fBm samples on an increasing time grid via the symmetric
    square root of the covariance. Grid capped at 2048 points."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid.size > 2048:
        raise ValueError("grid must be 1-d with 1..2048 points")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    C = fbm_covariance(theta, grid[:, None], grid[None, :])
    vals, vecs = np.linalg.eigh(C)
    vals = np.maximum(vals, 0.0) + 1e-12
    root = vecs * np.sqrt(vals)
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal((n_paths, grid.size))
    return z @ root.T
