"""Statistical harness: autocovariance, scaling fits, and law checks.

Estimators here are deliberately plain (biased FFT autocovariance,
batch-means errors, jackknife variances) so their small-sample behavior is
predictable enough to self-test.
"""

import math
import warnings

import numpy as np
from scipy import special

from .limits import fbm_covariance, finite_variance_regime


def autocovariance(series, max_lag=None, n_batches=32, mean=None):
    """Biased (1/n) autocovariance via FFT plus batch-means standard errors.

    mean: known process mean to center by; None estimates it from the
    sample. Estimating the mean of a slowly mixing series depresses every
    lag by Var(sample mean), so pass the known value when there is one.

    Returns (acov, se) with se computed from n_batches contiguous batches;
    se has min(len(acov), batch_length) entries.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError("series too short")
    xc = x - (x.mean() if mean is None else mean)
    m = 1
    while m < 2 * n:
        m *= 2
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / n
    if max_lag is not None:
        acov = acov[: max_lag + 1]
    nb = n // n_batches
    if nb < 2:
        n_batches = max(2, n // 4)
        nb = n // n_batches
    lag_cap = min(acov.size, nb)
    batches = np.empty((n_batches, lag_cap))
    for b in range(n_batches):
        seg = x[b * nb:(b + 1) * nb]
        sc = seg - (seg.mean() if mean is None else mean)
        mf = 1
        while mf < 2 * nb:
            mf *= 2
        g = np.fft.rfft(sc, mf)
        batches[b] = np.fft.irfft(g * np.conj(g), mf)[:lag_cap] / nb
    se = batches.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return acov, se


def integrated_autocovariance(series, dt, d=None, alpha=None, mean=None):
    """sigma^2 = 2 * integral of the autocovariance, trapezoid up to the
    first lag that drops below twice its standard error.

    When (d, alpha) sit in a regime whose integral diverges this warns and
    returns (None, 0): the estimator would chase a growing window.
    """
    if d is not None and alpha is not None and not finite_variance_regime(d, alpha):
        warnings.warn(
            "integrated autocovariance diverges for d=%d alpha=%g; "
            "use the superdiffusive normalization instead" % (d, alpha),
            stacklevel=2)
        return None, 0
    acov, se = autocovariance(series, mean=mean)
    cut = None
    for k in range(1, se.size):
        if acov[k] < 2.0 * se[k]:
            cut = k
            break
    if cut is None:
        cut = se.size - 1
        warnings.warn("autocovariance window never closed; truncating at %d" % cut,
                      stacklevel=2)
    sigma2 = 2.0 * dt * float(np.trapezoid(acov[: cut + 1]))
    return sigma2, cut


def jackknife_variance(samples):
    """(variance, se of log variance) by leave-one-out pseudo-values."""
    a = np.asarray(samples, dtype=float)
    R = a.size
    if R < 8:
        raise ValueError("need at least 8 replicas")
    s1 = a.sum()
    s2 = (a * a).sum()
    v = (s2 - s1 * s1 / R) / (R - 1)
    np_ = R - 1
    mean_i = (s1 - a) / np_
    var_i = (s2 - a * a - np_ * mean_i * mean_i) / (np_ - 1)
    lv = np.log(var_i)
    se_log = math.sqrt((R - 1) / R * np.sum((lv - lv.mean()) ** 2))
    return float(v), float(se_log)


def variance_scaling(values, horizons):
    """Weighted log-log fit of Var A(N) against N.

    values: (replicas, len(horizons)) array of functional values.
    Returns dict with per-horizon variance, its log-scale error, the fitted
    slope (= 2 theta), its standard error, and the intercept.
    """
    A = np.asarray(values, dtype=float)
    horizons = np.asarray(horizons, dtype=float)
    if A.ndim != 2 or A.shape[1] != horizons.size:
        raise ValueError("values must be (replicas, len(horizons))")
    var = np.empty(horizons.size)
    se_log = np.empty(horizons.size)
    for j in range(horizons.size):
        var[j], se_log[j] = jackknife_variance(A[:, j])
    x = np.log(horizons)
    y = np.log(var)
    w = 1.0 / se_log ** 2
    xw = np.sum(w * x) / np.sum(w)
    yw = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xw) ** 2)
    slope = float(np.sum(w * (x - xw) * (y - yw)) / sxx)
    intercept = float(yw - slope * xw)
    slope_se = float(math.sqrt(1.0 / sxx))
    return dict(horizons=horizons, var=var, se_log=se_log, slope=slope,
                slope_se=slope_se, intercept=intercept)


def _kolmogorov_sf(lam):
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def ks_test(samples, cdf):
    """One-sample Kolmogorov-Smirnov against a callable cdf.

    Returns (D, p) with the Stephens small-sample adjustment."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 samples")
    F = np.asarray(cdf(x), dtype=float)
    if np.any(F < -1e-12) or np.any(F > 1.0 + 1e-12):
        raise ValueError("cdf values outside [0, 1]")
    up = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    D = float(max(np.max(up - F), np.max(F - lo)))
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * D
    return D, _kolmogorov_sf(lam)


def chi_square(counts, probs, min_expected=5.0):
    """Goodness of fit with automatic pooling of thin cells.

    Bins are sorted by expected count; the tail is pooled until every cell
    expects at least min_expected. Returns (stat, dof, p).
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and probs must align")
    if np.any(probs < 0):
        raise ValueError("negative cell probability")
    total = counts.sum()
    psum = probs.sum()
    if abs(psum - 1.0) > 1e-9:
        raise ValueError("cell probabilities sum to %g, not 1" % psum)
    expected = probs * total
    order = np.argsort(expected)[::-1]
    exp_s = expected[order]
    cnt_s = counts[order]
    # walk from the thin end, pooling until the group clears the floor
    groups_exp = []
    groups_cnt = []
    acc_e = 0.0
    acc_c = 0.0
    for e, c in zip(exp_s[::-1], cnt_s[::-1]):
        acc_e += e
        acc_c += c
        if acc_e >= min_expected:
            groups_exp.append(acc_e)
            groups_cnt.append(acc_c)
            acc_e = 0.0
            acc_c = 0.0
    if acc_e > 0.0:
        if groups_exp:
            groups_exp[-1] += acc_e
            groups_cnt[-1] += acc_c
        else:
            groups_exp.append(acc_e)
            groups_cnt.append(acc_c)
    ge = np.asarray(groups_exp)
    gc = np.asarray(groups_cnt)
    if ge.size < 2:
        raise ValueError("pooling left a single cell; need more data")
    stat = float(np.sum((gc - ge) ** 2 / ge))
    dof = ge.size - 1
    p = float(special.gammaincc(0.5 * dof, 0.5 * stat))
    return stat, dof, p


def hurst_and_law_check(paths, grid, theta, sigma, ks_threshold=0.005,
                        cov_sigmas=4.0):
    """Check scaled functional paths against the (sigma-scaled) fractional
    Brownian law with Hurst index theta.

    paths: (replicas, len(grid)); grid: increasing positive times.
    Runs a KS test of the marginal at each grid time and compares every
    pairwise covariance cell against sigma^2 Cov_fBm within cov_sigmas
    standard errors. Returns dict(passed, checks=[...]).
    """
    paths = np.asarray(paths, dtype=float)
    grid = np.asarray(grid, dtype=float)
    R = paths.shape[0]
    if paths.ndim != 2 or paths.shape[1] != grid.size:
        raise ValueError("paths must be (replicas, len(grid))")
    checks = []
    for j, t in enumerate(grid):
        sd = sigma * t ** theta
        D, p = ks_test(paths[:, j], lambda z: special.ndtr(z / sd))
        checks.append(dict(check="marginal_ks_t=%g" % t, target="p>%g" % ks_threshold,
                           estimate=p, se=None, tolerance=ks_threshold,
                           passed=bool(p > ks_threshold)))
    emp = np.cov(paths.T, ddof=1)
    for i in range(grid.size):
        for j in range(i + 1, grid.size):
            target = sigma ** 2 * fbm_covariance(theta, grid[i], grid[j])
            se = math.sqrt((emp[i, i] * emp[j, j] + emp[i, j] ** 2) / (R - 1))
            ok = abs(emp[i, j] - target) <= cov_sigmas * se
            checks.append(dict(check="cov_t=(%g,%g)" % (grid[i], grid[j]),
                               target=target, estimate=float(emp[i, j]),
                               se=se, tolerance=cov_sigmas * se, passed=bool(ok)))
    return dict(passed=bool(all(c["passed"] for c in checks)), checks=checks)
