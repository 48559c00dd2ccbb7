"""Limit constants: dual routes, regime table, fBm covariance tools."""

import math

import numpy as np
import pytest
from scipy import special

from zrp import limits
from zrp.equilibrium import fugacity_of_density
from zrp.model import RateFamily
from zrp.observables import occupation_observable, rate_centered_observable

LINEAR = RateFamily("linear", a=1.0)


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.0), (1, 1.5), (2, 0.8),
                                     (2, 1.5)])
def test_weight_c_dual_routes(d, alpha):
    closed = limits.weight_c(d, alpha, method="closed")
    quad = limits.weight_c(d, alpha, method="quad")
    assert closed == pytest.approx(quad, rel=1e-8)


def test_weight_c_known_value_and_guards():
    # alpha = 1 on the line: pi / (Gamma(2) sin(pi/2)) = pi
    assert limits.weight_c(1, 1.0) == pytest.approx(math.pi, rel=1e-13)
    with pytest.raises(ValueError):
        limits.weight_c(1, 2.0)
    with pytest.raises(ValueError):
        limits.weight_c(1, 0.0)
    with pytest.raises(ValueError):
        limits.weight_c(1, 1.5, method="wild")


def test_gaussian_scale():
    assert np.allclose(limits.gaussian_scale(1, 2.0), [[1.0]])
    assert np.allclose(limits.gaussian_scale(2, 2.0), 0.5 * math.pi * np.eye(2))
    m = limits.gaussian_scale(1, 3.0)
    assert m[0, 0] == pytest.approx(math.pi ** 2 / 3.0, rel=1e-12)
    with pytest.raises(ValueError):
        limits.gaussian_scale(1, 1.5)


@pytest.mark.parametrize("d,alpha", [(1, 1.0), (1, 1.5), (2, 1.5), (1, 2.0),
                                     (2, 2.0), (1, 3.0), (2, 3.0)])
def test_origin_density_dual_routes(d, alpha):
    closed = limits.stable_density_at_origin(d, alpha, method="closed")
    quad = limits.stable_density_at_origin(d, alpha, method="quad")
    assert closed == pytest.approx(quad, rel=1e-8)


def test_origin_density_known_values():
    assert limits.stable_density_at_origin(1, 1.0) == pytest.approx(
        1.0 / math.pi ** 2, rel=1e-12)
    assert limits.stable_density_at_origin(1, 1.5) == pytest.approx(
        0.128547286255, rel=1e-9)
    assert limits.stable_density_at_origin(1, 3.0) == pytest.approx(
        0.219948406791, rel=1e-9)
    assert limits.stable_density_at_origin(1, 2.0) == pytest.approx(
        1.0 / math.sqrt(2.0 * math.pi), rel=1e-12)


def test_stable_density_cauchy_closed_form():
    # alpha = 1 limit is Cauchy with scale pi: f(z) = 1 / (pi^2 + z^2)
    z = np.array([0.0, 0.7, 2.0, 5.0])
    got = limits.stable_density(z, 1, 1.0)
    assert np.allclose(got, 1.0 / (math.pi ** 2 + z * z), rtol=1e-8)


def test_stable_density_matches_origin_and_normalizes():
    for d in (1, 2):
        f0 = limits.stable_density_at_origin(d, 1.5)
        assert limits.stable_density(0.0, d, 1.5) == pytest.approx(f0, rel=1e-9)
    z_near = np.linspace(0.0, 60.0, 6001)
    z_far = np.linspace(60.0, 2000.0, 1941)
    mass = 2.0 * (np.trapezoid(limits.stable_density(z_near, 1, 1.5), z_near)
                  + np.trapezoid(limits.stable_density(z_far, 1, 1.5), z_far))
    # tail beyond 2000 carries ~ 5e-6 of the mass
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_stable_density_gaussian_branch():
    s2 = math.pi ** 2 / 3.0
    z = np.array([0.0, 1.0, 3.0])
    want = np.exp(-0.5 * z * z / s2) / math.sqrt(2.0 * math.pi * s2)
    assert np.allclose(limits.stable_density(z, 1, 3.0), want, rtol=1e-12)


def test_finite_variance_regime_table():
    assert limits.finite_variance_regime(1, 0.5)
    assert not limits.finite_variance_regime(1, 1.0)
    assert not limits.finite_variance_regime(1, 1.5)
    assert limits.finite_variance_regime(2, 1.5)
    assert not limits.finite_variance_regime(2, 2.0)
    assert not limits.finite_variance_regime(2, 3.0)
    assert limits.finite_variance_regime(3, 0.7)


def _coeff(d, alpha, obs_kind="occupation"):
    prof = fugacity_of_density(1.0, LINEAR)
    obs = (occupation_observable(prof) if obs_kind == "occupation"
           else rate_centered_observable(prof))
    return limits.limit_law_coefficient(d, alpha, prof, obs), prof


def test_limit_law_regimes():
    c, _ = _coeff(1, 0.5)
    assert (c["theta"], c["sigma"], c["normalizer"], c["regime"], c["limit"]) \
        == (0.5, None, "sqrt", "diffusive", "brownian")
    c, _ = _coeff(1, 1.0)
    assert c["normalizer"] == "sqrt_log" and c["limit"] == "brownian"
    assert c["sigma"] == pytest.approx(math.sqrt(2.0 / math.pi ** 2), rel=1e-9)
    c, _ = _coeff(1, 1.5)
    assert c["theta"] == pytest.approx(2.0 / 3.0)
    assert c["normalizer"] == "power" and c["limit"] == "fbm"
    assert c["sigma"] ** 2 == pytest.approx(0.578462788149, rel=1e-9)
    c, _ = _coeff(1, 2.0)
    assert c["theta"] == 0.75 and c["normalizer"] == "power_logcorr"
    assert c["sigma"] ** 2 == pytest.approx(
        8.0 / 3.0 / math.sqrt(2.0 * math.pi), rel=1e-9)
    c, _ = _coeff(1, 3.0)
    assert c["theta"] == 0.75 and c["normalizer"] == "power"
    c, _ = _coeff(2, 1.5)
    assert c["regime"] == "diffusive" and c["sigma"] is None
    c, _ = _coeff(2, 2.0)
    assert c["normalizer"] == "sqrt_loglog" and c["regime"] == "marginal"
    c, _ = _coeff(2, 3.0)
    assert c["normalizer"] == "sqrt_log" and c["limit"] == "brownian"
    c, _ = _coeff(3, 1.5)
    assert c["regime"] == "diffusive"


def test_limit_law_observable_dependence():
    # sigma carries Vbar'^2; for linear rates the centered-rate observable
    # has the same derivative as occupation, so sigmas agree
    c_occ, prof = _coeff(1, 1.5, "occupation")
    c_rate, _ = _coeff(1, 1.5, "rate_centered")
    assert c_occ["sigma"] == pytest.approx(c_rate["sigma"], rel=1e-12)


def test_relaxation_constant():
    prof = fugacity_of_density(1.0, LINEAR)
    obs = occupation_observable(prof)
    got = limits.relaxation_constant(1, 3.0, prof, obs)
    f0 = limits.stable_density_at_origin(1, 3.0)
    assert got == pytest.approx(f0 / math.sqrt(2.0), rel=1e-12)
    assert got == pytest.approx(0.155527, rel=1e-4)
    got2 = limits.relaxation_constant(2, 3.0, prof, obs)
    assert got2 == pytest.approx(
        limits.stable_density_at_origin(2, 3.0) / 2.0, rel=1e-12)


def test_fbm_covariance():
    assert limits.fbm_covariance(0.75, 2.0, 2.0) == pytest.approx(2.0 ** 1.5)
    # s exactly halfway to t makes the value 1/2 for every Hurst index
    for th in (0.55, 2.0 / 3.0, 0.75):
        assert limits.fbm_covariance(th, 0.5, 1.0) == pytest.approx(0.5)
    assert limits.fbm_covariance(0.5, 3.0, 7.0) == pytest.approx(3.0)
    m = limits.fbm_covariance(0.6, np.array([[1.0], [2.0]]),
                              np.array([[1.0, 2.0]]))
    assert m.shape == (2, 2) and m[0, 1] == m[1, 0]
    with pytest.raises(ValueError):
        limits.fbm_covariance(1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        limits.fbm_covariance(0.0, 1.0, 2.0)


def test_sample_fbm_matches_covariance():
    grid = np.array([0.5, 1.0, 2.0, 4.0])
    theta = 0.75
    X = limits.sample_fbm(theta, grid, 6000, seed=11)
    assert X.shape == (6000, 4)
    X2 = limits.sample_fbm(theta, grid, 6000, seed=11)
    assert np.array_equal(X, X2)
    emp = np.cov(X.T, ddof=1)
    want = limits.fbm_covariance(theta, grid[:, None], grid[None, :])
    for i in range(4):
        for j in range(4):
            se = math.sqrt((emp[i, i] * emp[j, j] + emp[i, j] ** 2) / 5999.0)
            assert abs(emp[i, j] - want[i, j]) < 4.5 * se
    with pytest.raises(ValueError):
        limits.sample_fbm(theta, np.array([2.0, 1.0]), 10, seed=0)
    with pytest.raises(ValueError):
        limits.sample_fbm(theta, np.array([[1.0, 2.0]]), 10, seed=0)
