import numpy as np
import pytest

from zrp.equilibrium import fugacity_of_density
from zrp.model import RateFamily
from zrp.observables import (custom_observable, evaluate_observable,
                             make_observable, value_table, vbar_prime_of,
                             window_offsets)

LINEAR = RateFamily("linear", 1.0, 0.0)
AFFINE = RateFamily("affine", 1.0, 0.5)


def test_window_offsets_shapes():
    assert window_offsets(1, 0) == ((0,),)
    assert window_offsets(1, 1) == ((-1,), (0,), (1,))
    d2 = window_offsets(2, 1)
    assert (0, 0) in d2 and len(d2) == 5  # l2 ball, no corners
    assert (1, 1) not in d2


def test_occupation_observable():
    prof = fugacity_of_density(2.0, LINEAR)
    obs = make_observable("occupation", prof)
    assert evaluate_observable(obs, [3], prof) == pytest.approx(1.0)
    assert vbar_prime_of(obs, prof) == 1.0
    tab = value_table(obs, prof, 6)
    np.testing.assert_allclose(tab, np.arange(7) - 2.0)
    # centered: E V = 0
    full = value_table(obs, prof, prof.pmf.size - 1)
    assert float((full * prof.pmf).sum()) == pytest.approx(0.0, abs=1e-12)


def test_rate_centered_observable():
    prof = fugacity_of_density(1.0, AFFINE)
    obs = make_observable("rate_centered", prof)
    tab = value_table(obs, prof, 8)
    expect = np.array([AFFINE.rate(k) for k in range(9)]) - prof.beta
    np.testing.assert_allclose(tab, expect, rtol=1e-14)
    assert vbar_prime_of(obs, prof) == pytest.approx(prof.beta_prime)
    full = value_table(obs, prof, prof.pmf.size - 1)
    assert float((full * prof.pmf).sum()) == pytest.approx(0.0, abs=1e-12)


def test_custom_window_square_of_center():
    # V(eta) = eta(0)^2 for Poisson(1): mean 2, d/dgamma E eta^2 = 1 + 2 gamma
    prof = fugacity_of_density(1.0, LINEAR)
    cap = 40
    obs = custom_observable(np.arange(cap + 1.0) ** 2, prof, d=1,
                            window_radius=0)
    assert evaluate_observable(obs, [3], prof) == pytest.approx(9.0 - 2.0,
                                                                rel=1e-10)
    assert vbar_prime_of(obs, prof) == pytest.approx(3.0, rel=1e-6)


def test_custom_window_pair_product():
    # V = eta(-1) * eta(1) over a radius-1 window; E V = gamma^2
    prof = fugacity_of_density(0.8, LINEAR)
    cap = 30
    k = np.arange(cap + 1.0)
    k0, _, k2 = np.meshgrid(k, k, k, indexing="ij")  # axes follow (-1, 0, 1)
    obs = custom_observable(k0 * k2, prof, d=1, window_radius=1)
    assert evaluate_observable(obs, [2, 5, 3], prof) == pytest.approx(
        6.0 - 0.64, rel=1e-10)
    # d/dgamma gamma^2 = 2 gamma
    assert vbar_prime_of(obs, prof) == pytest.approx(1.6, rel=1e-6)


def test_custom_table_cap_guard():
    prof = fugacity_of_density(1.0, LINEAR)
    with pytest.raises(ValueError):
        custom_observable(np.arange(5.0), prof, d=1, window_radius=0)
    big = custom_observable(np.arange(60.0), prof, d=1, window_radius=0)
    with pytest.raises(ValueError):
        evaluate_observable(big, [61], prof)


def test_polynomial_growth_certificate():
    prof = fugacity_of_density(1.0, LINEAR)
    obs = custom_observable(np.arange(41.0) ** 2, prof, d=1, window_radius=0,
                            poly_degree=2)
    k = np.arange(41.0)
    assert np.all(np.abs(obs.table) <= obs.poly_const * (1.0 + k) ** 2 + 1e-12)
