import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import tulap_cdf_series
from dpbinom.distributions import (
    PmfVector,
    PrivacyParams,
    TulapParams,
    binom_pmf,
    binom_pmf_vector,
    cdf_offset,
    hypergeom_pmf_vector,
    laplace_sample,
    privacy_to_tulap,
    tulap_cdf,
    tulap_quantile,
    tulap_sample,
)
from dpbinom.errors import DomainError

bs = st.floats(0.01, 0.95)
qs = st.floats(0.0, 0.5)
xs = st.floats(-30, 30)


# --- frozen hand-computed values -------------------------------------------


def test_cdf_at_one_with_half_b():
    # k = 1, t > 0: 1 - b/(1+b) * (b + (1 - 1 + 1/2)(1 - b)) = 1 - (1/3)(3/4) = 3/4
    assert tulap_cdf(1.0, TulapParams(0.0, 0.5, 0.0)) == pytest.approx(0.75, abs=1e-15)


def test_cdf_at_center_is_half():
    for b in (0.1, 0.5, 0.9):
        assert tulap_cdf(3.0, TulapParams(3.0, b, 0.0)) == pytest.approx(0.5, abs=1e-15)


def test_cdf_at_half_integer_minus_half():
    # t = -1/2: k = 0 (ties to even), b/(1+b) * (b + 0 * (1 - b)) = b^2/(1+b)... at t=-1/2, t-k+1/2 = 0
    b = 0.4
    assert tulap_cdf(-0.5, TulapParams(0.0, b, 0.0)) == pytest.approx(b / (1 + b), abs=1e-15)


def test_uniform_limit():
    p = TulapParams(0.0, 0.0, 0.0)
    assert tulap_cdf(0.25, p) == pytest.approx(0.75)
    assert tulap_cdf(-0.6, p) == 0.0
    assert tulap_cdf(0.6, p) == 1.0


def test_privacy_mapping_values():
    p = PrivacyParams(1.0, 0.1)
    b = math.exp(-1)
    assert p.b == pytest.approx(b, rel=1e-15)
    assert p.q == pytest.approx(0.2 * b / (1 - b + 0.2 * b), rel=1e-14)
    assert PrivacyParams(2.0).q == 0.0
    t = privacy_to_tulap(1.0, 0.1).tulap(2.0)
    assert (t.m, t.b) == (2.0, p.b)


# --- oracle: series over the lattice ----------------------------------------


@given(xs, bs, qs)
def test_cdf_matches_series(x, b, q):
    assert tulap_cdf(x, TulapParams(0.0, b, q)) == pytest.approx(
        tulap_cdf_series(x, 0.0, b, q), abs=1e-12
    )


@pytest.mark.parametrize("m", [-2.3, 0.0, 7.5])
def test_cdf_matches_series_shifted(m):
    for x in np.linspace(m - 6, m + 6, 37):
        assert tulap_cdf(x, TulapParams(m, 0.6, 0.2)) == pytest.approx(
            tulap_cdf_series(x, m, 0.6, 0.2), abs=1e-12
        )


# --- properties --------------------------------------------------------------


@given(xs, bs, qs)
def test_cdf_symmetry(t, b, q):
    assert cdf_offset(t, b, q) + cdf_offset(-t, b, q) == pytest.approx(1.0, abs=1e-12)


@given(bs, qs)
def test_cdf_monotone_and_bounded(b, q):
    t = np.linspace(-40, 40, 4001)
    f = cdf_offset(t, b, q)
    assert np.all(np.diff(f) >= -1e-15)
    assert f.min() >= 0.0 and f.max() <= 1.0


@given(bs, st.floats(0.01, 0.5), st.floats(0.001, 0.999))
def test_quantile_inverts_cdf(b, q, p):
    params = TulapParams(1.5, b, q)
    x = tulap_quantile(p, params)
    assert tulap_cdf(x, params) == pytest.approx(p, abs=1e-10)


def test_cdf_infinite_and_nan():
    assert cdf_offset(np.inf, 0.5, 0.0) == 1.0
    assert cdf_offset(-np.inf, 0.5, 0.0) == 0.0
    with pytest.raises(DomainError):
        cdf_offset(np.nan, 0.5, 0.0)


def test_truncated_support_is_bounded():
    params = TulapParams(0.0, 0.5, 0.3)
    lo, hi = tulap_quantile(1e-12, params), tulap_quantile(1 - 1e-12, params)
    assert tulap_cdf(lo - 1e-6, params) == 0.0
    assert tulap_cdf(hi + 1e-6, params) == 1.0


# --- sampler -----------------------------------------------------------------


@pytest.mark.parametrize("b,q", [(0.2, 0.0), (0.7, 0.0), (0.5, 0.3), (0.0, 0.0)])
def test_sampler_ks(b, q, rng):
    params = TulapParams(0.5, b, q)
    draws = tulap_sample(params, rng, 20_000)
    res = stats.kstest(draws, lambda x: np.array([tulap_cdf(v, params) for v in np.atleast_1d(x)]))
    assert res.pvalue > 1e-3


def test_sampler_respects_truncation(rng):
    params = TulapParams(0.0, 0.5, 0.3)
    draws = tulap_sample(params, rng, 50_000)
    lo, hi = tulap_quantile(1e-12, params), tulap_quantile(1 - 1e-12, params)
    assert draws.min() >= lo - 1e-9 and draws.max() <= hi + 1e-9


def test_sampler_deterministic_and_scalar():
    params = TulapParams(0.0, 0.5, 0.0)
    a = tulap_sample(params, np.random.default_rng(3), 5)
    b = tulap_sample(params, np.random.default_rng(3), 5)
    np.testing.assert_array_equal(a, b)
    assert isinstance(tulap_sample(params, np.random.default_rng(3)), float)


def test_laplace_sampler_scale(rng):
    draws = laplace_sample(2.0, rng, 200_000)
    assert np.var(draws) == pytest.approx(8.0, rel=0.03)


# --- pmfs ---------------------------------------------------------------------


@given(st.integers(0, 300), st.one_of(st.sampled_from([0.0, 1.0]), st.floats(1e-12, 1 - 1e-12)))
def test_binom_pmf_matches_scipy(n, theta):
    ours = binom_pmf(n, theta)
    ref = stats.binom.pmf(np.arange(n + 1), n, theta)
    np.testing.assert_allclose(ours, ref, atol=1e-12)
    assert ours.sum() == pytest.approx(1.0, abs=1e-12)


def test_binom_pmf_broadcasts():
    out = binom_pmf(5, np.array([0.1, 0.5]))
    assert out.shape == (2, 6)
    np.testing.assert_allclose(out[1], stats.binom.pmf(np.arange(6), 5, 0.5))


@pytest.mark.parametrize("n", [1, 2, 7, 40, 200])
def test_hypergeom_matches_scipy(n):
    w = hypergeom_pmf_vector(n).weights
    np.testing.assert_allclose(w, stats.hypergeom.pmf(np.arange(n + 1), 2 * n, n, n), atol=1e-12)
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)


def test_pmf_vector_validation():
    assert binom_pmf_vector(3, 0.5).n == 3
    with pytest.raises(DomainError):
        PmfVector(2, np.array([0.5, 0.2, 0.2]))


# --- validation --------------------------------------------------------------


@pytest.mark.parametrize(
    "eps,delta", [(0.0, 0.0), (-1.0, 0.0), (float("nan"), 0.0), (float("inf"), 0.0), (1.0, 1.0), (1.0, -0.1)]
)
def test_privacy_rejects_bad_input(eps, delta):
    with pytest.raises(DomainError):
        PrivacyParams(eps, delta)


def test_huge_epsilon_is_nearly_uniform():
    p = PrivacyParams(50.0)
    assert p.b < 1e-20
    assert cdf_offset(0.25, p.b, p.q) == pytest.approx(0.75)


def test_tiny_epsilon_clamps_b():
    p = PrivacyParams(1e-10)
    assert p.b < 1.0
    assert 0.0 < cdf_offset(1.0, p.b, p.q) < 1.0
