import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnoprisk.varengine import (
    BinnedPdf,
    convolve,
    convolve_to_horizon,
    n_convolutions,
    percentile_999,
    sample_second_largest,
    var_report,
)


def brute_sum_pdf(*masses):
    """Enumerate every index tuple; 1-based indices add as k1 + k2 + ... - (m - 1)."""
    m = len(masses)
    out = np.zeros(sum(len(p) for p in masses) - m + 1)
    for idx in itertools.product(*(range(len(p)) for p in masses)):
        out[sum(idx)] += np.prod([p[i] for p, i in zip(masses, idx)])
    return out


def exact_second_largest_mean(pdf, n=1000):
    """E[second largest of n draws] from the order-statistic CDF F^n + n F^(n-1) (1 - F)."""
    f = np.clip(pdf.cdf(), 0.0, 1.0)
    g = f**n + n * f ** (n - 1) * (1 - f)
    return float(np.diff(np.concatenate([[0.0], g])) @ pdf.values)


def random_pdf(g, width=1.0):
    return BinnedPdf(g.dirichlet(np.ones(5)), width)


def test_delta_at_first_bin_is_identity_on_indices(rng):
    p = random_pdf(rng)
    r = convolve(BinnedPdf([1.0, 0, 0, 0, 0], 1.0), p)
    np.testing.assert_allclose(r.mass[:5], p.mass, rtol=1e-15)
    assert np.all(r.mass[5:] == 0)


def test_uniform_self_convolution_is_triangular():
    u = BinnedPdf(np.full(5, 0.2), 3.0)
    r = convolve(u, u)
    np.testing.assert_allclose(r.mass, [0.04, 0.08, 0.12, 0.16, 0.20, 0.16, 0.12, 0.08, 0.04], atol=1e-15)
    assert r.order == 2 and len(r) == 9


def test_matches_enumeration(rng):
    for _ in range(50):
        p, q = random_pdf(rng), random_pdf(rng)
        np.testing.assert_allclose(convolve(p, q).mass, brute_sum_pdf(p.mass, q.mass), atol=1e-12)


def test_closed_form_on_equal_lengths(rng):
    # R(k) = sum_{m=max(1,k+1-n)}^{min(k,n)} P(m) P(k-m+1), 1-based
    p = random_pdf(rng)
    n = 5
    direct = [sum(p.mass[m - 1] * p.mass[k - m] for m in range(max(1, k + 1 - n), min(k, n) + 1))
              for k in range(1, 2 * n)]
    np.testing.assert_allclose(convolve(p, p).mass, direct, atol=1e-15)


def test_mismatched_widths_rejected():
    with pytest.raises(ValueError, match="bin widths"):
        convolve(BinnedPdf(np.full(5, 0.2), 1.0), BinnedPdf(np.full(5, 0.2), 2.0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_commutative_associative_and_conserving(seed):
    g = np.random.default_rng(seed)
    p, q, r = random_pdf(g, 2.5), random_pdf(g, 2.5), random_pdf(g, 2.5)
    np.testing.assert_allclose(convolve(p, q).mass, convolve(q, p).mass, atol=1e-12)
    np.testing.assert_allclose(convolve(convolve(p, q), r).mass, convolve(p, convolve(q, r)).mass, atol=1e-12)
    assert convolve(p, q).mass.sum() == pytest.approx(1.0, abs=1e-9)
    # midpoint mapping makes means add
    assert convolve(p, q).mean() == pytest.approx(p.mean() + q.mean(), abs=1e-9)
    pq = convolve(p, q)
    assert convolve(pq, r).mean() == pytest.approx(pq.mean() + r.mean(), abs=1e-9)


def test_monetary_mapping():
    p = BinnedPdf(np.full(5, 0.2), 10.0)
    np.testing.assert_allclose(p.values, [5, 15, 25, 35, 45])
    pp = convolve(p, p)
    np.testing.assert_allclose(pp.values, np.arange(10, 100, 10))


def test_length_invariant_enforced():
    with pytest.raises(ValueError):
        BinnedPdf(np.full(8, 1 / 8), 1.0, order=2, base_bins=5)


# -- horizon ------------------------------------------------------------------

def test_horizon_equal_to_window_returns_input(rng):
    p = random_pdf(rng)
    assert convolve_to_horizon(p, 90, 90) is p


def test_quarter_to_year_uses_four_factors():
    assert n_convolutions(90, 365) == 4
    p = BinnedPdf(np.full(5, 0.2), 1.0)
    assert convolve_to_horizon(p, 90, 365).order == 4


def test_rounding_half_up():
    assert n_convolutions(2, 5) == 3
    assert n_convolutions(240, 5000) == 21
    assert n_convolutions(60, 5000) == 83


def test_threefold_matches_enumeration(rng):
    p = random_pdf(rng)
    r = convolve_to_horizon(p, 10, 30)
    assert r.order == 3 and len(r) == 13
    np.testing.assert_allclose(r.mass, brute_sum_pdf(p.mass, p.mass, p.mass), atol=1e-12)
    np.testing.assert_allclose(r.mass, convolve(convolve(p, p), p).mass, atol=1e-15)


def test_horizon_below_window():
    with pytest.raises(ValueError, match="horizon below aggregation window"):
        convolve_to_horizon(BinnedPdf(np.full(5, 0.2), 1.0), 10, 5)


# -- percentile ---------------------------------------------------------------

def test_degenerate_pdf_gives_its_value():
    p = BinnedPdf([0, 0, 1.0, 0, 0], 4.0)
    v, s = percentile_999(p, 10, 1000, np.random.default_rng(0))
    assert v == p.value_of(3) == 10.0
    assert s == 0.0


def test_percentile_is_deterministic_under_seed(rng):
    p = convolve_to_horizon(random_pdf(rng), 1, 6)
    a = percentile_999(p, 20, 1000, np.random.default_rng(5))
    b = percentile_999(p, 20, 1000, np.random.default_rng(5))
    assert a == b


def test_second_largest_is_an_order_statistic():
    p = BinnedPdf(np.full(5, 0.2), 1.0)
    g = np.random.default_rng(3)
    vals = sample_second_largest(p, 200, 4, g)
    assert set(np.unique(vals)) <= set(p.values)


def test_sampled_mean_matches_exact_order_statistic(rng):
    # the sampling procedure estimates E[second largest of 1000]; check it against the exact value
    for _ in range(20):
        p = convolve_to_horizon(random_pdf(rng), 1, int(rng.integers(2, 30)))
        reps = 100
        v, s = percentile_999(p, reps, 1000, rng)
        exact = exact_second_largest_mean(p)
        se = s / np.sqrt(reps)
        assert abs(v - exact) <= max(4 * se, 1e-9)


def test_analytic_quantile_monotone_under_dominance(rng):
    for _ in range(50):
        p = convolve_to_horizon(random_pdf(rng), 1, 4)
        # shift mass upward: q first-order dominates p
        q_mass = p.mass.copy()
        k = int(rng.integers(0, len(q_mass) - 1))
        move = q_mass[k] * rng.random()
        q_mass[k] -= move
        q_mass[k + 1] += move
        q = BinnedPdf(q_mass, 1.0, p.order, p.base_bins)
        assert np.all(q.cdf() <= p.cdf() + 1e-15)
        assert q.quantile_index() >= p.quantile_index()


# -- report -------------------------------------------------------------------

def test_single_process_report(rng):
    p = random_pdf(rng, 7.0)
    rep = var_report([p], 10, 50, 30, np.random.default_rng(1))
    assert rep.total_var == rep.per_process_var[0]
    assert rep.horizon == 50 and rep.repetitions == 30


def test_top_bin_degenerate_marginals():
    ms = [BinnedPdf([0, 0, 0, 0, 1.0], w) for w in (10.0, 4.0, 1.5)]
    rep = var_report(ms, 25, 100, 5, np.random.default_rng(0))
    # m = 4: top index 4 * 4 + 1 = 17, value (17 + 2 - 1) * w = 18 w = 4 * 4.5 w
    expected = sum(18 * w for w in (10.0, 4.0, 1.5))
    assert rep.total_var == pytest.approx(expected, rel=1e-15)
    np.testing.assert_array_equal(rep.per_process_std, 0.0)


def test_report_requires_order_one(rng):
    p = convolve(random_pdf(rng), random_pdf(rng))
    with pytest.raises(ValueError):
        var_report([p], 1, 5, 2, rng)
