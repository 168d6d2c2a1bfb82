import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from selfish_mmab.numerics import (DomainError, MultPrecisionState, bernoulli_kl, explo_budget,
                                   first_stop, kl_vec, klucb_at_least, klucb_index,
                                   min_samples_to_stop, mult_precision_bound,
                                   mult_precision_step, punishment_gamma, punishment_probs,
                                   quantize, raw_punishment_probs, round_half_up, trimmed_mean)

probs = st.floats(0.0, 1.0, allow_nan=False)


# -- Bernoulli KL -------------------------------------------------------

def test_kl_identical_is_zero():
    assert bernoulli_kl(0.5, 0.5) == 0.0


def test_kl_against_high_precision_value():
    # 40-digit evaluation of the closed form (mpmath)
    assert bernoulli_kl(0.2, 0.5) == pytest.approx(0.19274475702175743, abs=1e-15)


def test_kl_point_mass():
    assert bernoulli_kl(1.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)


def test_kl_infinite_at_boundary():
    assert bernoulli_kl(0.3, 1.0) == math.inf
    assert bernoulli_kl(0.3, 0.0) == math.inf
    assert bernoulli_kl(1.0, 1.0) == 0.0


@pytest.mark.parametrize("p,q", [(-0.1, 0.5), (0.5, 1.2), (float("nan"), 0.5)])
def test_kl_domain(p, q):
    with pytest.raises(DomainError):
        bernoulli_kl(p, q)


@given(probs, probs)
def test_kl_vec_matches_scalar(p, q):
    v = float(kl_vec(np.array([p]), np.array([q]))[0])
    s = bernoulli_kl(p, q)
    if math.isinf(s):
        assert math.isinf(v)
    else:
        assert v == pytest.approx(s, rel=1e-12, abs=1e-15)


# -- kl-UCB -------------------------------------------------------------

def test_klucb_zero_budget():
    assert klucb_index(0.3, 17, 0.0) == 0.3


def test_klucb_unpulled_is_one():
    assert klucb_index(0.42, 0, 3.0) == 1.0


def test_klucb_against_root_finder():
    # root of 10 kl(0.5, q) = 1 from a 40-digit bisection (mpmath)
    b = klucb_index(0.5, 10, 1.0)
    assert b == pytest.approx(0.71287863145582399, abs=1e-9)
    assert abs(10 * bernoulli_kl(0.5, b) - 1.0) <= 1e-6


@settings(max_examples=300)
@given(st.floats(0.0, 0.99), st.integers(1, 10_000), st.floats(0.01, 30.0))
def test_klucb_matches_brent(mean, pulls, budget):
    b = klucb_index(mean, pulls, budget)
    g = lambda q: pulls * bernoulli_kl(mean, q) - budget
    hi = 1.0 - 1e-15
    if g(hi) <= 0:
        assert b >= hi - 1e-9
        return
    root = brentq(g, mean, hi, xtol=1e-15)
    assert b == pytest.approx(root, abs=1e-9)


@settings(max_examples=500)
@given(st.floats(0.0, 0.999), st.integers(1, 10_000), st.floats(0.5, 30.0))
def test_klucb_residual_when_well_conditioned(mean, pulls, budget):
    b = klucb_index(mean, pulls, budget)
    # near q = 1 the map q -> pulls kl(mean, q) is too steep for float64
    if b < 1.0 - 1e-9:
        assert abs(pulls * bernoulli_kl(mean, b) - budget) <= 1e-6


@settings(max_examples=300)
@given(probs, st.integers(0, 5000), st.floats(0.0, 30.0), st.floats(0.0, 30.0))
def test_klucb_monotone_in_budget(mean, pulls, b1, b2):
    lo, hi = sorted((b1, b2))
    assert klucb_index(mean, pulls, lo) <= klucb_index(mean, pulls, hi)
    assert klucb_index(mean, pulls, lo) >= mean


@settings(max_examples=300)
@given(probs, st.integers(1, 5000), st.integers(1, 5000), st.floats(0.0, 30.0))
def test_klucb_nonincreasing_in_pulls(mean, n1, n2, budget):
    lo, hi = sorted((n1, n2))
    assert klucb_index(mean, hi, budget) <= klucb_index(mean, lo, budget)


@settings(max_examples=500)
@given(st.floats(0.0, 0.999), st.integers(1, 5000), st.floats(0.1, 30.0), probs)
def test_klucb_at_least_agrees_with_bisection(mean, pulls, budget, x):
    b = klucb_index(mean, pulls, budget)
    # away from the final bisection bracket the two must agree
    if abs(x - b) > 1e-9:
        assert klucb_at_least(mean, pulls, budget, x) == (b >= x)


# -- exploration budget -------------------------------------------------

def test_budget_at_e_to_the_e():
    assert explo_budget(math.exp(math.e)) == pytest.approx(math.e + 4, abs=1e-12)


def test_budget_clamp_below_three():
    # log 3 + 4 log log 3, evaluated with mpmath
    assert explo_budget(1) == pytest.approx(1.4748035991349058, abs=1e-12)
    assert explo_budget(2.5) == explo_budget(1)


def test_budget_at_100():
    assert explo_budget(100) == pytest.approx(10.713888689219696, abs=1e-12)


# -- quantization -------------------------------------------------------

def test_quantize_midpoint():
    rng = np.random.default_rng(0)
    draws = np.array([quantize(0.625, 2, rng) for _ in range(20_000)])
    assert set(np.unique(draws)) == {0.5, 0.75}
    assert draws.mean() == pytest.approx(0.625, abs=4 * 0.125 / math.sqrt(20_000))


def test_quantize_on_grid_and_boundary():
    rng = np.random.default_rng(1)
    assert all(quantize(0.25, 2, rng) == 0.25 for _ in range(100))
    assert all(quantize(1.0, 3, rng) == 1.0 for _ in range(100))


@given(probs, st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_quantize_neighbours(mean, p, seed):
    q = quantize(mean, p, np.random.default_rng(seed))
    scale = 1 << p
    assert q in (math.floor(mean * scale) / scale, (math.floor(mean * scale) + 1) / scale)
    assert 0.0 <= q <= 1.0


def test_quantize_unbiased():
    rng = np.random.default_rng(2)
    mean, n = 0.3141, 100_000
    draws = np.array([quantize(mean, 3, rng) for _ in range(n)])
    sd = draws.std() / math.sqrt(n)
    assert abs(draws.mean() - mean) <= 3 * sd


# -- trimmed mean -------------------------------------------------------

@pytest.mark.parametrize("vals,expected", [
    ([0.1, 0.2, 0.3, 0.9], 0.25),
    ([0.4, 0.4, 0.4], 0.4),
    ([0.0, 0.5, 0.5, 1.0, 0.5], 0.5),
])
def test_trimmed_mean_examples(vals, expected):
    assert trimmed_mean(vals) == pytest.approx(expected, abs=1e-15)


def test_trimmed_mean_needs_three():
    with pytest.raises(DomainError):
        trimmed_mean([0.1, 0.2])


# -- punishment distribution --------------------------------------------

def test_punishment_equal_means_uniform():
    p = punishment_probs(np.full(4, 0.6), 2)
    assert np.all(p == 0.25)
    assert p.sum() == 1.0


def test_punishment_raw_example():
    # gamma = 2/3, top-2 mean 0.7: p_k = 1 - gamma * 0.7 / mu_k, clipped at 0
    raw = raw_punishment_probs(np.array([0.9, 0.5, 0.1]), 2)
    expected = [1 - (2 / 3) * 0.7 / 0.9, 1 - (2 / 3) * 0.7 / 0.5, 0.0]
    assert raw == pytest.approx(expected, abs=1e-12)
    assert raw == pytest.approx([0.48148148148148, 0.06666666666667, 0.0], abs=1e-12)
    assert raw.sum() <= 1.0
    p = punishment_probs(np.array([0.9, 0.5, 0.1]), 2)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert p[0] / p[1] == pytest.approx(raw[0] / raw[1])


def test_punishment_all_zero_is_uniform():
    # a large heterogeneity factor pushes every raw p_k below zero
    assert raw_punishment_probs(np.full(6, 0.5), 3, 0.3).sum() == 0.0
    assert punishment_probs(np.full(6, 0.5), 3, 0.3) == pytest.approx(np.full(6, 1 / 6))


def test_gamma_heterogeneous_factor():
    g = punishment_gamma(6, 3)
    assert g == pytest.approx((5 / 6) ** 2)
    assert punishment_gamma(6, 3, 0.05) == pytest.approx(g * (1.05 / 0.95) ** 2)


@settings(max_examples=300)
@given(st.integers(2, 30).flatmap(lambda K: st.tuples(
    st.just(K), st.integers(2, K), st.lists(st.floats(0.01, 1.0), min_size=K, max_size=K))))
def test_punishment_raw_sum_at_most_one(args):
    K, M, mu = args
    assert raw_punishment_probs(np.array(mu), M).sum() <= 1.0 + 1e-12


# -- multiplicative-precision stopping ----------------------------------

def test_constant_stream_stops_at_44():
    logT = math.log(100)
    stop = first_stop(np.ones(200), 0.5, logT)
    assert stop + 1 == 44
    st_ = MultPrecisionState(0.5, logT)
    fired = []
    for i in range(60):
        st_, f = mult_precision_step(st_, 1.0)
        fired.append(f)
    assert fired.index(True) + 1 == 44


def test_first_sample_never_stops():
    st_ = MultPrecisionState(0.99, 0.01)
    _, f = mult_precision_step(st_, 1.0)
    assert not f


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.5, 1.0]), min_size=1, max_size=400),
       st.floats(0.05, 0.9), st.floats(0.5, 5.0))
def test_first_stop_matches_incremental(xs, delta, logT):
    st_ = MultPrecisionState(delta, logT)
    expected = -1
    for i, x in enumerate(xs):
        st_, f = mult_precision_step(st_, x)
        if f:
            expected = i
            break
    assert first_stop(xs, delta, logT) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([0.0, 1.0]), min_size=2, max_size=300),
       st.integers(1, 299), st.floats(0.1, 0.9), st.floats(0.5, 4.0))
def test_first_stop_split_matches_whole(xs, cut, delta, logT):
    cut = min(cut, len(xs) - 1)
    whole = first_stop(xs, delta, logT)
    head = first_stop(xs[:cut], delta, logT)
    if head >= 0:
        assert whole == head
        return
    a = np.array(xs[:cut])
    tail = first_stop(xs[cut:], delta, logT, cut, float(np.cumsum(a)[-1]),
                      float(np.cumsum(a * a)[-1]))
    assert whole == (cut + tail if tail >= 0 else -1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=200),
       st.floats(0.05, 0.9), st.floats(0.5, 4.0))
def test_lookahead_never_overshoots(prefix, delta, logT):
    """Whatever comes next, the rule cannot fire before the look-ahead says."""
    a = np.array(prefix)
    if first_stop(a, delta, logT) >= 0:
        return
    n, s = a.size, float(a.sum())
    ss = float(((a - a.mean()) ** 2).sum())
    m = min_samples_to_stop(n, s, delta, logT, ss)
    rng = np.random.default_rng(n)
    for fill in (np.ones(m - 1), rng.integers(0, 2, m - 1).astype(float)):
        stop = first_stop(fill, delta, logT, n, s, float((a * a).sum()))
        assert stop == -1


def test_bound_grows_as_mean_shrinks():
    T = 10_000
    assert mult_precision_bound(0.12, 0.1, T) > mult_precision_bound(0.12, 0.5, T)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.49, -0.5)] == [1, 2, 2, 0]
