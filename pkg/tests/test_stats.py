"""Estimator calibration on processes with known answers."""

import math
import warnings

import numpy as np
import pytest
from scipy import special

from zrp import stats
from zrp.limits import sample_fbm


def _ar1(n, phi, seed, sig=1.0):
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.standard_normal(n) * sig
    x = np.empty(n)
    x[0] = eps[0] / math.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    return x


def test_autocovariance_ar1():
    phi = 0.6
    x = _ar1(1 << 17, phi, seed=2)
    acov, se = stats.autocovariance(x, max_lag=6)
    want = phi ** np.arange(7) / (1.0 - phi * phi)
    for k in range(7):
        assert abs(acov[k] - want[k]) < 5.0 * se[k]
    assert acov[0] > acov[1] > acov[2] > 0


def test_autocovariance_short_series_guard():
    with pytest.raises(ValueError):
        stats.autocovariance(np.arange(5.0))
    # short but legal series still produces finite errors
    acov, se = stats.autocovariance(np.sin(np.arange(40.0)))
    assert np.all(np.isfinite(acov)) and np.all(np.isfinite(se))


def test_integrated_autocovariance_ar1():
    phi = 0.5
    x = _ar1(1 << 17, phi, seed=7)
    sigma2, cut = stats.integrated_autocovariance(x, dt=1.0)
    want = (1.0 / (1.0 - phi * phi)) * (1.0 + phi) / (1.0 - phi)
    assert cut >= 2
    assert sigma2 == pytest.approx(want, rel=0.15)


def test_integrated_autocovariance_divergent_regime():
    x = _ar1(4096, 0.3, seed=1)
    with pytest.warns(UserWarning, match="diverges"):
        sigma2, cut = stats.integrated_autocovariance(x, 1.0, d=1, alpha=1.5)
    assert sigma2 is None and cut == 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        got, _ = stats.integrated_autocovariance(x, 1.0, d=1, alpha=0.5)
    assert got is not None


def test_jackknife_matches_sample_variance():
    rng = np.random.Generator(np.random.PCG64(5))
    a = rng.standard_normal(64) * 2.0
    v, se_log = stats.jackknife_variance(a)
    assert v == pytest.approx(float(np.var(a, ddof=1)), rel=1e-12)
    assert se_log > 0
    a = rng.standard_normal(4000) * 2.0
    v, se_log = stats.jackknife_variance(a)
    assert abs(math.log(v / 4.0)) < 4.0 * se_log
    with pytest.raises(ValueError):
        stats.jackknife_variance(np.arange(5.0))


def test_variance_scaling_recovers_hurst():
    rng = np.random.Generator(np.random.PCG64(13))
    horizons = np.array([1.0, 4.0, 16.0, 64.0])
    theta = 0.75
    A = rng.standard_normal((2000, 4)) * horizons ** theta
    fit = stats.variance_scaling(A, horizons)
    assert abs(fit["slope"] - 2.0 * theta) < 4.0 * fit["slope_se"]
    assert abs(fit["intercept"]) < 0.2
    assert fit["var"].shape == (4,)
    with pytest.raises(ValueError):
        stats.variance_scaling(A[:, :3], horizons)


def test_ks_test_calibrates_and_discriminates():
    rng = np.random.Generator(np.random.PCG64(3))
    z = rng.standard_normal(2000)
    D, p = stats.ks_test(z, special.ndtr)
    assert p > 0.01
    D2, p2 = stats.ks_test(z + 0.5, special.ndtr)
    assert p2 < 1e-6 and D2 > D
    with pytest.raises(ValueError):
        stats.ks_test(z[:5], special.ndtr)
    with pytest.raises(ValueError):
        stats.ks_test(z, lambda v: v)  # not a cdf: escapes [0, 1]


def test_ks_exact_small_case():
    # hand case: 8 equispaced quantiles of U(0,1) have D = 1/16
    x = (np.arange(8) + 0.5) / 8.0
    D, p = stats.ks_test(x, lambda v: np.clip(v, 0.0, 1.0))
    assert D == pytest.approx(1.0 / 16.0, rel=1e-12)
    assert p > 0.99


def test_chi_square_basic_and_pooling():
    stat, dof, p = stats.chi_square([55, 45], [0.5, 0.5])
    assert stat == pytest.approx(1.0, rel=1e-12)
    assert dof == 1
    assert p == pytest.approx(float(special.gammaincc(0.5, 0.5)), rel=1e-12)
    # thin tail cells pool until each group expects >= 5: here the four
    # smallest expectations (0.2 + 0.8 + 3 + 6) merge into one group
    counts = np.array([70, 20, 6, 3, 1, 0])
    probs = np.array([0.7, 0.2, 0.06, 0.03, 0.008, 0.002])
    stat, dof, p = stats.chi_square(counts, probs)
    assert dof == 2
    assert 0.0 < p <= 1.0
    with pytest.raises(ValueError):
        stats.chi_square([1, 2], [0.5, 0.6])
    with pytest.raises(ValueError):
        stats.chi_square([1, 2, 3], [0.5, 0.5])


def test_chi_square_calibration():
    rng = np.random.Generator(np.random.PCG64(17))
    probs = np.array([0.4, 0.3, 0.2, 0.1])
    counts = rng.multinomial(5000, probs)
    _, dof, p = stats.chi_square(counts, probs)
    assert dof == 3
    assert p > 0.01
    _, _, p_bad = stats.chi_square(counts, np.array([0.25] * 4))
    assert p_bad < 1e-10


def test_law_check_accepts_matching_fbm():
    grid = np.array([0.5, 1.0, 2.0])
    theta, sigma = 2.0 / 3.0, 0.8
    paths = sigma * sample_fbm(theta, grid, 3000, seed=21)
    out = stats.hurst_and_law_check(paths, grid, theta, sigma)
    assert out["passed"]
    names = [c["check"] for c in out["checks"]]
    assert sum(n.startswith("marginal_ks") for n in names) == 3
    assert sum(n.startswith("cov_t=") for n in names) == 3


def test_law_check_rejects_wrong_hurst():
    grid = np.array([0.5, 1.0, 2.0, 4.0])
    paths = sample_fbm(0.5, grid, 3000, seed=8)
    out = stats.hurst_and_law_check(paths, grid, theta=0.8, sigma=1.0)
    assert not out["passed"]
