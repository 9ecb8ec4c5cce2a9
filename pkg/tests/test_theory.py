import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rmtlab.errors import DomainError
from rmtlab.theory import (UNDEFINED, MPCdf, assumptions_check, bennett_rate, classify_regime,
                           critical_q_star, degree_rate, error_parameter, expected_outlier_count,
                           lambda_map, lambda_map_inv, lambda_q, lambda_q_inv, mp_density, mp_edges,
                           mp_sample, thresholds)

SQ3 = math.sqrt(3)


def h(u):
    # reference Bennett form, valid for u > -1
    return (1 + u) * math.log(1 + u) - u


@pytest.mark.parametrize("u, want", [(0, 0), (math.e - 1, 1), (2, 3 * math.log(3) - 2)])
def test_bennett_values(u, want):
    assert bennett_rate(u) == pytest.approx(want, abs=1e-12)


def test_bennett_rejects_negative():
    with pytest.raises(DomainError):
        bennett_rate(-0.1)


def test_thresholds_gamma9():
    th = thresholds(SQ3)
    assert th.r2_star == pytest.approx(6.634, abs=1e-3)
    assert th.l2_star == pytest.approx(5.289, abs=1e-3)
    assert th.r1_star == pytest.approx(1.179, abs=1e-3)
    assert th.ihara_bass_bound == pytest.approx(3 / (3 * math.log(3) - 2), abs=1e-12)
    assert th.ihara_bass_bound == pytest.approx(2.31511, abs=1e-5)
    assert th.connectivity_bound == pytest.approx(3)


def test_thresholds_square():
    th = thresholds(1.0)
    assert th.r2_star == pytest.approx(1 / (math.log(4) - 1), abs=1e-12)
    assert th.l2_star is UNDEFINED and th.ihara_bass_bound == math.inf
    assert set(th.undefined) == {"l2_star", "ihara_bass_bound"}
    assert th.to_dict()["l2_star"] is None


def test_thresholds_reject_small_q():
    with pytest.raises(DomainError):
        thresholds(0.9)


@settings(max_examples=60)
@given(st.floats(1.01, 4.0))
def test_thresholds_match_rate_forms(q):
    q2 = q * q
    th = thresholds(q)
    assert th.r2_star == pytest.approx(1 / (q2 * h(1 / q2)), rel=1e-10)
    assert th.r1_star == pytest.approx(1 / (h(q2) / q2), rel=1e-10)
    assert th.l2_star == pytest.approx(1 / (q2 * h(-1 / q2)), rel=1e-10)
    assert th.r2_star > max(th.r1_star, th.l2_star)


def test_critical_q_star():
    qs = critical_q_star()
    assert qs == pytest.approx(1.5084747, abs=1e-5)
    th = thresholds(qs)
    assert th.l2_star == pytest.approx(th.ihara_bass_bound, rel=1e-9)


def test_lambda_values():
    assert lambda_q(5, SQ3) == pytest.approx(math.sqrt(35 / 6), abs=1e-12)
    assert lambda_q(5, SQ3) == pytest.approx(2.415229, abs=1e-6)
    assert lambda_q(1, SQ3) == pytest.approx(0.912871, abs=1e-6)


def test_lambda_domain():
    with pytest.raises(DomainError):
        lambda_q(3.0, SQ3)  # inside the forbidden band
    with pytest.raises(DomainError):
        lambda_q(-1.0, SQ3)
    with pytest.raises(DomainError):
        lambda_q_inv(1.0, SQ3)
    assert math.isnan(lambda_map(np.array([3.0]), SQ3)[0])
    assert math.isnan(lambda_map_inv(np.array([1.0]), SQ3)[0])


@settings(max_examples=60)
@given(st.floats(1.05, 3.0))
def test_lambda_edges_land_on_bulk_edges(q):
    lo, hi = mp_edges(q)
    q2 = q * q
    assert lambda_q(q2 + 1, q) == pytest.approx(hi, abs=1e-9)
    assert lambda_q(q2 - 1, q) == pytest.approx(lo, abs=1e-6)
    assert lambda_q_inv(1 / q2 + 1, q) == pytest.approx(hi, abs=1e-9)
    # endpoint clamp: a hair inside the band still evaluates
    assert lambda_q(q2 + 1 - 5e-13, q) == pytest.approx(hi, abs=1e-9)


@settings(max_examples=60)
@given(st.floats(1.05, 3.0), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
def test_lambda_monotone_upper_branch(q, a, b):
    q2 = q * q
    t1, t2 = q2 + 1 + min(a, b), q2 + 1 + max(a, b)
    assume(t2 - t1 > 1e-9)
    assert lambda_q(t1, q) <= lambda_q(t2, q)
    assert lambda_q(t1, q) >= q + 1 / q - 1e-12
    v = lambda_map(np.array([t1, t2]), q)
    assert v[0] == pytest.approx(lambda_q(t1, q)) and v[1] == pytest.approx(lambda_q(t2, q))


def test_mp_edges_gamma9():
    lo, hi = mp_edges(SQ3)
    assert (lo, hi) == pytest.approx((1.154700, 2.309401), abs=1e-6)


@pytest.mark.parametrize("q", [1.0, 1.3, SQ3])
def test_mp_density_moments(q):
    lo, hi = mp_edges(q)
    s = np.linspace(lo, hi, 400_001)
    f = mp_density(s, q)
    assert np.trapezoid(f, s) == pytest.approx(1, abs=2e-3)
    # sum of sigma^2 over m values equals ||X||_F^2 ~ sqrt(nm), so E sigma^2 = q^2
    assert np.trapezoid(s * s * f, s) == pytest.approx(q * q, abs=5e-3)


def test_mp_cdf_and_sampling():
    cdf = MPCdf(SQ3)
    lo, hi = mp_edges(SQ3)
    assert cdf(lo) == 0 and cdf(hi) == pytest.approx(1)
    assert cdf.inverse(0.5) == pytest.approx(cdf.inverse(cdf(cdf.inverse(0.5))), abs=1e-8)
    x = mp_sample(SQ3, 20000, np.random.default_rng(0))
    assert np.mean(x ** 2) == pytest.approx(3, abs=0.02)


def test_error_parameter():
    assert error_parameter(math.e) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert error_parameter(100) == pytest.approx(0.214597, abs=1e-6)
    with pytest.raises(DomainError):
        error_parameter(1.0)


def test_degree_rate():
    assert degree_rate(3, SQ3, 50) == pytest.approx(0.5 * math.log(2 * math.pi * 150), abs=1e-12)
    assert degree_rate(3, SQ3, 50) == pytest.approx(3.4240, abs=1e-3)
    assert degree_rate(1 / 3, SQ3, 50, side="V1") == pytest.approx(0.5 * math.log(2 * math.pi * 50 / 3))
    with pytest.raises(DomainError):
        degree_rate(0, SQ3, 50)


def test_expected_outlier_count():
    r2 = thresholds(SQ3).r2_star
    assert expected_outlier_count(r2, SQ3, 10_000, 1000) == pytest.approx(0.1)
    assert expected_outlier_count(7.5, SQ3, 10_000, 1000) == 0
    est = expected_outlier_count(5.29, SQ3, 10_000, 1000)
    assert est == pytest.approx(1000 * 10 ** (-4 * 5.29 / r2))
    assert 0.3 < est < 1.3
    assert expected_outlier_count(1.0, 1.0, 200, 100, "left-V2") == 0


def test_classify_regime_gamma9():
    assert classify_regime(7.5, SQ3).right_region == "no-right-outliers"
    assert classify_regime(7.5, SQ3).left_region == "no-left-outliers"
    lab = classify_regime(5.29, SQ3)
    assert lab.right_region == "V2-right-outliers"
    # 5.29 sits just above l2* = 5.28905, so the threshold comparison says no left outliers
    assert lab.left_region == "no-left-outliers"
    assert classify_regime(5.2, SQ3).left_region == "V2-left-outliers"
    assert classify_regime(1.5, SQ3).left_region == "disconnected-regime"
    assert classify_regime(1.0, SQ3).right_region == "V1-and-V2-right-outliers"
    assert classify_regime(2.5, SQ3).left_region == "disconnected-regime"
    # near q = 1 the Ihara-Bass bound exceeds q^2
    assert classify_regime(5.0, 1.2).left_region == "undetermined-below-assumptions"
    assert classify_regime(2.0, 1.0).left_region == "no-left-outliers"


def test_assumptions_check():
    assert assumptions_check(5, SQ3) == {"connectivity": True, "ihara_bass": True}
    assert assumptions_check(2.5, SQ3) == {"connectivity": False, "ihara_bass": True}


@pytest.mark.parametrize("q", [1.0, 1.2, SQ3, 2.5])
def test_mp_density_total_mass(q):
    assert MPCdf(q).total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("q", [1.2, SQ3, 2.0])
def test_lambda_branches_stay_outside_bulk(q):
    q2 = q * q
    lo, hi = mp_edges(q)
    low = lambda_map(np.linspace(0, q2 - 1, 500, endpoint=False), q)
    high = lambda_map(np.linspace(q2 + 1, q2 + 40, 500), q)
    assert np.all(low <= lo + 1e-12) and np.all(np.diff(low) >= -1e-12)
    assert np.all(high >= hi - 1e-12) and np.all(np.diff(high) >= -1e-12)


def test_r2_dominates_l2_on_grid():
    for q in np.linspace(1.001, 4.0, 400):
        th = thresholds(float(q))
        assert th.r2_star >= th.l2_star


@pytest.mark.parametrize("alpha", [4.5, 5.0, 6.0])
def test_degree_rate_matches_binomial_pmf(alpha):
    from scipy.stats import binom
    d, n = 50.0, 90_000
    p = 3 * d / n          # V2 degrees ~ Bin(n, p) with mean q^2 d at q^2 = 3
    k = alpha * d
    log_pmf = binom.logpmf(round(k), n, p)
    assert -degree_rate(alpha, SQ3, d) == pytest.approx(log_pmf, rel=5e-3)
