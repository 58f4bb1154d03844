import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dp_lp_max_power
from dpbinom.distributions import PrivacyParams, binom_pmf, tulap_sample
from dpbinom.errors import DomainError
from dpbinom.one_sided import ump_pvalue, verify_dp
from dpbinom.simulation import exact_power
from dpbinom.two_sided import (
    MonotonicityWarning,
    approx_induced_test_vector,
    approx_pvalue,
    approx_test_vector,
    bonferroni_pvalue,
    bonferroni_test_vector,
    umau_pvalue,
    umau_threshold,
    umpu_solve,
    umpu_test_vector,
)

privacies = st.builds(PrivacyParams, st.floats(0.05, 3.0), st.sampled_from([0.0, 0.01]))


# --- UMPU ---------------------------------------------------------------------


@given(st.integers(2, 60), st.floats(0.05, 0.95), st.sampled_from([0.01, 0.05, 0.1]), privacies)
def test_umpu_size_unbiased_dp(n, theta0, alpha, priv):
    sol = umpu_solve(n, theta0, alpha, priv)
    tv = umpu_test_vector(n, theta0, alpha, priv)
    assert tv.size() == pytest.approx(alpha, abs=1e-10)
    assert abs(sol.unbiased_residual) <= 1e-6
    assert verify_dp(tv, priv).passed


def test_umpu_power_minimized_at_null():
    priv = PrivacyParams(0.5)
    tv = umpu_test_vector(30, 0.3, 0.05, priv)
    grid = np.linspace(0.0, 1.0, 401)
    power = exact_power(tv, grid)
    assert power.min() >= 0.05 - 1e-10
    # zero derivative at theta0 by central differences
    h = 1e-5
    slope = (exact_power(tv, 0.3 + h) - exact_power(tv, 0.3 - h)) / (2 * h)
    assert abs(slope) < 1e-4


@pytest.mark.parametrize("n", [10, 31, 100])
def test_umpu_centered_at_half(n):
    assert umpu_solve(n, 0.5, 0.05, PrivacyParams(1.0)).k == pytest.approx(n / 2, abs=1e-6)


def test_umpu_reflection():
    priv = PrivacyParams(1.0)
    a = umpu_solve(20, 0.3, 0.05, priv)
    b = umpu_solve(20, 0.7, 0.05, priv)
    assert a.k + b.k == pytest.approx(20.0, abs=1e-6)
    assert a.m == pytest.approx(b.m, abs=1e-6)


@pytest.mark.parametrize("n,theta0,eps,theta", [(12, 0.25, 1.0, 0.432), (12, 0.25, 1.0, 0.1), (10, 0.6, 0.5, 0.9)])
def test_umpu_is_most_powerful_unbiased(n, theta0, eps, theta):
    priv = PrivacyParams(eps)
    w = binom_pmf(n, theta0)
    slope = w * (np.arange(n + 1) - n * theta0)  # d/dtheta of the size vanishes at theta0
    best = dp_lp_max_power(n, w, 0.05, priv, binom_pmf(n, theta), extra_eq=(slope,))
    assert exact_power(umpu_test_vector(n, theta0, 0.05, priv), theta) == pytest.approx(best, abs=1e-7)


@given(st.integers(5, 50), privacies)
def test_umpu_dominates_bonferroni_at_half(n, priv):
    grid = np.linspace(0.0, 1.0, 51)
    u = exact_power(umpu_test_vector(n, 0.5, 0.05, priv), grid)
    b = exact_power(bonferroni_test_vector(n, 0.5, 0.05, priv), grid)
    assert np.all(u >= b - 1e-9)


def test_biased_bonferroni_can_beat_umpu():
    # away from 1/2 Bonferroni is biased, so UMPU optimality does not cover it
    priv = PrivacyParams(1.0)
    bonf = bonferroni_test_vector(30, 0.25, 0.05, priv)
    umpu = umpu_test_vector(30, 0.25, 0.05, priv)
    assert exact_power(bonf, 0.245) < 0.05 - 2e-4  # power dips below alpha
    assert exact_power(bonf, 0.432) - exact_power(umpu, 0.432) == pytest.approx(0.016619749, abs=1e-8)


# --- Bonferroni ------------------------------------------------------------------


@given(st.integers(1, 40), st.floats(0.05, 0.95), privacies, st.floats(-5, 45))
def test_bonferroni_is_twice_smaller_tail(n, theta0, priv, z):
    p = ump_pvalue(z, n, theta0, priv)
    assert bonferroni_pvalue(z, n, theta0, priv) == pytest.approx(min(1.0, 2 * min(p, 1 - p)), abs=1e-14)


def test_bonferroni_size_and_dp():
    priv = PrivacyParams(0.3, 0.01)
    tv = bonferroni_test_vector(25, 0.2, 0.05, priv)
    assert tv.size() == pytest.approx(0.05, abs=1e-10)
    assert verify_dp(tv, priv).passed


# --- approximate test ---------------------------------------------------------------


@pytest.mark.parametrize("n,theta0,z", [(20, 0.3, 9.3), (30, 0.5, 20.0)])
def test_approx_pvalue_monte_carlo(n, theta0, z, rng):
    priv = PrivacyParams(1.0)
    r = 400_000
    draws = rng.binomial(n, theta0, r) + tulap_sample(priv.tulap(), rng, r)
    est = np.mean(np.abs(draws - n * theta0) >= abs(z - n * theta0))
    se = np.sqrt(est * (1 - est) / r)
    assert abs(approx_pvalue(z, n, theta0, priv) - est) < 4 * se


@given(st.integers(2, 50), st.floats(0.05, 0.95), privacies)
def test_approx_test_vectors_have_exact_size(n, theta0, priv):
    for tv in (approx_test_vector(n, theta0, 0.05, priv), approx_induced_test_vector(n, theta0, 0.05, priv)):
        assert tv.size() == pytest.approx(0.05, abs=1e-10)
        assert verify_dp(tv, priv).passed


def test_induced_vector_matches_pvalue_rule(rng):
    priv = PrivacyParams(1.0)
    tv = approx_induced_test_vector(15, 0.4, 0.1, priv)
    r = 200_000
    z = 8 + tulap_sample(priv.tulap(), rng, r)
    est = np.mean(approx_pvalue(z, 15, 0.4, priv) <= 0.1)
    assert tv.phi[8] == pytest.approx(est, abs=4 * np.sqrt(est * (1 - est) / r))


def test_approx_equals_umpu_at_half():
    priv = PrivacyParams(0.5)
    np.testing.assert_allclose(
        approx_test_vector(40, 0.5, 0.05, priv).phi, umpu_test_vector(40, 0.5, 0.05, priv).phi, atol=1e-9
    )


@given(st.floats(-10, 40))
def test_approx_pvalue_symmetric_at_half(d):
    priv = PrivacyParams(1.0)
    assert approx_pvalue(15 + d, 30, 0.5, priv) == pytest.approx(approx_pvalue(15 - d, 30, 0.5, priv), abs=1e-12)


# --- UMAU -------------------------------------------------------------------------------


def test_umau_threshold_has_exact_size():
    priv = PrivacyParams(1.0)
    k, t = umau_threshold(20, 0.3, 0.05, priv)
    from dpbinom.two_sided import _two_tail_phi
    from dpbinom.distributions import binom_pmf

    x = np.arange(21.0)
    assert _two_tail_phi(x, k, t, priv.b, priv.q) @ binom_pmf(20, 0.3) == pytest.approx(0.05, abs=1e-10)


@pytest.mark.parametrize("z", [17.0, 19.5, 25.0])
def test_umau_matches_approx_at_half(z):
    priv = PrivacyParams(1.0)
    assert umau_pvalue(z, 30, 0.5, priv, tol=1e-9) == pytest.approx(approx_pvalue(z, 30, 0.5, priv), abs=1e-7)


def test_umau_extremes():
    priv = PrivacyParams(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MonotonicityWarning)
        assert umau_pvalue(15.0, 30, 0.5, priv) == 1.0
        assert umau_pvalue(500.0, 30, 0.5, priv) < 1e-5


def test_rejects_bad_theta0():
    with pytest.raises(DomainError):
        umpu_solve(10, 1.0, 0.05, PrivacyParams(1.0))
