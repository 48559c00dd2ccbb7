"""Upper incomplete gamma at negative parameter, in the scaled form used by
the Ewald-split lattice sums: g_a(x) = x^a * Gamma(-a, x) for a > 0, x >= 0,
with g_a(0) = 1/a."""

import numpy as np
from scipy.special import exp1, gammaincc
from scipy.special import gamma as gamma_fn

# Below this x the downward recursion from Gamma(s, x) loses digits to
# cancellation; above it the small-x series would need many terms.
_SPLIT = 0.5
_SERIES_TERMS = 26


def _g_large(a, x):
    # Gamma(s-1, x) = (Gamma(s, x) - x^(s-1) e^-x) / (s - 1), descending from
    # the smallest nonnegative start parameter congruent to -a mod 1.
    n = int(np.ceil(a - 1e-12))
    s = n - a
    if s < 1e-12:
        g = exp1(x)
        s = 0.0
    else:
        g = gammaincc(s, x) * gamma_fn(s)
    ex = np.exp(-x)
    for _ in range(n):
        g = (g - x ** (s - 1.0) * ex) / (s - 1.0)
        s -= 1.0
    return x ** a * g


def _g_small_integer(a_int, x):
    # stable recursion g_j = (e^-x - x g_{j-1}) / j from g_0 = Gamma(0, x)
    ex = np.exp(-x)
    g = exp1(x)
    for j in range(1, a_int + 1):
        g = (ex - x * g) / j
    return g


def _g_small_series(a, x):
    # x^a Gamma(-a) + sum_j (-x)^j / (j! (a - j)), convergent and stable
    # for x < 1 when a is not within ~1e-8 of an integer
    out = np.where(x > 0.0, x ** a, 0.0) * gamma_fn(-a)
    term = np.ones_like(x)
    fact = 1.0
    for j in range(_SERIES_TERMS):
        out = out + term / (fact * (a - j))
        term = term * (-x)
        fact *= j + 1.0
    return out


def g_upper_scaled(a, x):
    """g_a(x) = x^a Gamma(-a, x) elementwise for a > 0; g_a(0) = 1/a."""
    if a <= 0:
        raise ValueError("parameter a must be positive")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = np.empty_like(x)
    n = int(round(a))
    is_int = abs(a - n) < 1e-8
    small = x < _SPLIT
    if np.any(small):
        xs = x[small]
        if is_int:
            out[small] = _g_small_integer(n, np.maximum(xs, 1e-300))
        else:
            out[small] = _g_small_series(a, xs)
        zero = small & (x == 0.0)
        if np.any(zero):
            out[zero] = 1.0 / a
    if np.any(~small):
        out[~small] = _g_large(a, x[~small])
    return out[0] if scalar else out
