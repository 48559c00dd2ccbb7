"""Local observables V and their equilibrium profiles.

An observable depends on the occupancies in a window around the origin and
is centered so its equilibrium mean vanishes. The mean profile Vbar(gamma)
and its derivative Vbar'(gamma) drive every limit-law coefficient.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import equilibrium


def window_offsets(d, radius):
    """Lattice points with l2 norm <= radius, lexicographic order."""
    if radius == 0:
        return ((0,) * d,)
    rng = range(-radius, radius + 1)
    pts = [p for p in itertools.product(rng, repeat=d) if sum(v * v for v in p) <= radius * radius]
    return tuple(sorted(pts))


@dataclass(frozen=True)
class ObservableSpec:
    kind: str  # occupation | rate_centered | window_custom
    window_radius: int
    vbar: float  # 0 by construction
    vbar_prime: float
    offsets: tuple
    gamma: float
    table: np.ndarray = None  # centered values, window_custom only
    cap: int = 0
    poly_degree: int = 1
    poly_const: float = 1.0

    @property
    def n_window(self):
        return len(self.offsets)


def _window_mean(raw_table, profile, n_window):
    """Exact product-measure expectation of a table observable."""
    p = profile.pmf
    cap = raw_table.shape[0] - 1
    if cap < profile.K_trunc:
        raise ValueError(
            "table cap %d is below the pmf truncation %d; expectation would "
            "not be exact" % (cap, profile.K_trunc)
        )
    q = np.zeros(cap + 1)
    q[: p.size] = p
    out = raw_table
    for _ in range(n_window):
        out = np.tensordot(out, q, axes=([0], [0]))
    return float(out)


def occupation_observable(profile, d=1):
    """V(eta) = eta(0) - gamma; Vbar'(gamma) = 1."""
    return ObservableSpec(
        kind="occupation",
        window_radius=0,
        vbar=0.0,
        vbar_prime=1.0,
        offsets=window_offsets(d, 0),
        gamma=profile.gamma,
    )


def rate_centered_observable(profile, d=1):
    """V(eta) = c(eta(0)) - beta; Vbar'(gamma) = beta'(gamma) by the mean
    jump-rate identity E c(eta(0)) = beta."""
    return ObservableSpec(
        kind="rate_centered",
        window_radius=0,
        vbar=0.0,
        vbar_prime=profile.beta_prime,
        offsets=window_offsets(d, 0),
        gamma=profile.gamma,
    )


def custom_observable(raw_table, profile, d, window_radius, poly_degree=None):
    """Window observable from an explicit value table over occupancy tuples.

    raw_table has one axis per window site (lexicographic offset order), each
    of length cap+1. Centered exactly against the product pmf; Vbar'(gamma)
    by central finite difference of the window expectation.
    """
    offsets = window_offsets(d, window_radius)
    raw_table = np.asarray(raw_table, dtype=float)
    if raw_table.ndim != len(offsets):
        raise ValueError(
            "table has %d axes but the radius-%d window has %d sites"
            % (raw_table.ndim, window_radius, len(offsets))
        )
    mean = _window_mean(raw_table, profile, len(offsets))
    gamma = profile.gamma
    h = 1e-4 * gamma
    lo = equilibrium.fugacity_of_density(gamma - h, profile.family)
    hi = equilibrium.fugacity_of_density(gamma + h, profile.family)
    vbar_prime = (
        _window_mean(raw_table, hi, len(offsets))
        - _window_mean(raw_table, lo, len(offsets))
    ) / (2.0 * h)
    centered = raw_table - mean
    cap = raw_table.shape[0] - 1
    if poly_degree is None:
        poly_degree = max(1, len(raw_table.shape))
    # |V| <= C (1 + sum window occupancy)^degree with the smallest C the
    # table admits; recorded so the locality/growth contract is auditable
    tot = np.zeros(raw_table.shape)
    for axis in range(raw_table.ndim):
        shape = [1] * raw_table.ndim
        shape[axis] = raw_table.shape[axis]
        tot = tot + np.arange(raw_table.shape[axis]).reshape(shape)
    poly_const = float(np.max(np.abs(centered) / (1.0 + tot) ** poly_degree))
    return ObservableSpec(
        kind="window_custom",
        window_radius=window_radius,
        vbar=0.0,
        vbar_prime=float(vbar_prime),
        offsets=offsets,
        gamma=gamma,
        table=centered,
        cap=cap,
        poly_degree=poly_degree,
        poly_const=poly_const,
    )


def make_observable(kind, profile, **kwargs):
    if kind == "occupation":
        return occupation_observable(profile)
    if kind == "rate_centered":
        return rate_centered_observable(profile)
    if kind == "window_custom":
        return custom_observable(profile=profile, **kwargs)
    raise ValueError("unknown observable kind: %r" % (kind,))


def evaluate_observable(obs, window, profile):
    """V on a window of occupancies given in offset order."""
    window = np.asarray(window)
    if window.size < obs.n_window:
        raise ValueError("window smaller than the observable's radius")
    if obs.kind == "occupation":
        return float(window[0]) - obs.gamma
    if obs.kind == "rate_centered":
        return float(profile.family.rate(int(window[0]))) - profile.beta
    if np.any(window > obs.cap):
        raise ValueError(
            "window occupancy exceeds the table cap %d; enlarge the table" % obs.cap
        )
    return float(obs.table[tuple(int(v) for v in window)])


def vbar_prime_of(obs, profile):
    """d/dgamma of the observable's equilibrium mean profile."""
    if obs.kind == "occupation":
        return 1.0
    if obs.kind == "rate_centered":
        return profile.beta_prime
    return obs.vbar_prime


def value_table(obs, profile, n_max):
    """V as a table over the origin occupancy 0..n_max, for the single-site
    fast path inside the simulation kernel."""
    k = np.arange(n_max + 1)
    if obs.kind == "occupation":
        return k.astype(float) - obs.gamma
    if obs.kind == "rate_centered":
        return profile.family.rate(k).astype(float) - profile.beta
    raise ValueError("value_table requires a single-site closed-form observable")
