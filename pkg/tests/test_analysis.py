import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from triehh.analysis import (
    DiscoveryQuery,
    count_from_frequency,
    discovery_rate,
    log_hypergeom_pmf,
    min_population,
    rate_at,
    round_probability,
)
from triehh.data import planted_dataset
from triehh.errors import ParameterError, UnsatisfiableError
from triehh.privacy import choose_parameters
from triehh.simulation import run_single_word


def exact_tail(n, m, theta, W):
    """P(X >= theta) summed in 50-digit arithmetic, from whichever side has fewer terms."""
    lo, hi = max(0, m - (n - W)), min(W, m)
    if theta <= lo:
        return 1.0
    if theta > hi:
        return 0.0
    with mpmath.workdps(50):
        total = mpmath.binomial(n, m)

        def pmf(i):
            return mpmath.binomial(W, i) * mpmath.binomial(n - W, m - i) / total

        if hi - theta < theta - lo:
            return float(mpmath.fsum(pmf(i) for i in range(theta, hi + 1)))
        return float(1 - mpmath.fsum(pmf(i) for i in range(lo, theta)))


def exact_log_pmf(i, n, W, m):
    with mpmath.workdps(50):
        return float(mpmath.log(mpmath.binomial(W, i) * mpmath.binomial(n - W, m - i) / mpmath.binomial(n, m)))


def enumerate_tail(n, m, theta, W):
    hits = sum(1 for s in itertools.combinations(range(n), m) if sum(1 for u in s if u < W) >= theta)
    return hits / math.comb(n, m)


def test_small_enumeration():
    assert enumerate_tail(5, 2, 1, 2) == pytest.approx(0.7)
    assert round_probability(5, 2, 1, 2) == pytest.approx(0.7, abs=1e-15)
    assert discovery_rate(5, 2, 1, 2, 3) == pytest.approx(0.343, abs=1e-15)


@pytest.mark.parametrize("n, m, theta, W", [(8, 3, 2, 4), (9, 5, 3, 6), (7, 7, 2, 3), (6, 1, 1, 1)])
def test_against_enumeration(n, m, theta, W):
    assert round_probability(n, m, theta, W) == pytest.approx(enumerate_tail(n, m, theta, W), abs=1e-12)


@pytest.mark.parametrize("theta", [1, 3, 10])
def test_no_holders(theta):
    assert round_probability(100, 20, theta, 0) == 0.0


@pytest.mark.parametrize("theta", [1, 5, 20])
def test_everyone_holds(theta):
    assert round_probability(100, 20, theta, 100) == 1.0


def test_theta_above_batch():
    assert round_probability(100, 5, 6, 80) == 0.0


def test_rate_L1_is_round_probability():
    assert discovery_rate(1000, 50, 4, 100, 1) == round_probability(1000, 50, 4, 100)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 10**7), st.data())
def test_matches_high_precision(n, data):
    m = data.draw(st.integers(1, min(n, 50000)))
    theta = data.draw(st.integers(1, max(1, min(m, 40))))
    # Keep W near the threshold region so both tails get exercised.
    W = data.draw(st.integers(0, min(n, 3 * theta * n // m + 1)))
    ref = exact_tail(n, m, theta, W)
    got = round_probability(n, m, theta, W)
    assert 0.0 <= got <= 1.0
    assert got == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("n, W, m", [(10**7, 3000, 20000), (1000, 40, 200), (50, 10, 25)])
def test_log_pmf_matches_high_precision(n, W, m):
    for i in range(max(0, m - (n - W)), min(W, m) + 1, max(1, min(W, m) // 17)):
        assert log_hypergeom_pmf(i, n, W, m) == pytest.approx(exact_log_pmf(i, n, W, m), rel=1e-12, abs=1e-12)


def test_large_population_beats_lgamma_cancellation():
    # A log-gamma evaluation loses about 2e-8 here; the saddle-point form does not.
    n, W, m = 10**7, 3000, 20000
    assert log_hypergeom_pmf(0, n, W, m) == pytest.approx(exact_log_pmf(0, n, W, m), abs=1e-13)
    lg = (math.lgamma(n - W + 1) - math.lgamma(m + 1) - math.lgamma(n - W - m + 1)
          - math.lgamma(n + 1) + math.lgamma(m + 1) + math.lgamma(n - m + 1))
    assert abs(lg - exact_log_pmf(0, n, W, m)) > 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(10, 5000), st.data())
def test_monotone_in_W(n, data):
    m = data.draw(st.integers(1, n))
    theta = data.draw(st.integers(1, 30))
    W = data.draw(st.integers(0, n - 1))
    assert discovery_rate(n, m, theta, W + 1, 5) >= discovery_rate(n, m, theta, W, 5)


@pytest.mark.parametrize(
    "args",
    [(0, 1, 1, 0), (10, 0, 1, 0), (10, 11, 1, 0), (10, 5, 0, 3), (10, 5, 1, 11), (10, 5, 1, -1)],
)
def test_query_validation(args):
    with pytest.raises(ParameterError):
        round_probability(*args)


def test_discovery_query():
    q = DiscoveryQuery(n=5, m=2, theta=1, W=2, L=3)
    assert q.round_probability() == pytest.approx(0.7)
    assert q.rate() == pytest.approx(0.343)
    with pytest.raises(ParameterError):
        DiscoveryQuery(n=5, m=2, theta=1, W=2, L=0)


@pytest.mark.parametrize("f, n, W", [(0.01, 10**4, 100), (0.0123, 1000, 13), (0.5, 3, 2), (1.0, 7, 7), (0.07, 100, 7)])
def test_count_from_frequency(f, n, W):
    assert count_from_frequency(f, n) == W


def test_rate_at_invalid_population_is_zero():
    assert rate_at(100, 0.5, 2.0, 10, "invn2") == 0.0


def test_min_population_vacuous_target():
    assert min_population(0.05, 1e-9, 4.0, 10) == 10**4


def test_min_population_is_minimal_and_stable():
    n = min_population(0.01, 0.9, 2.0, 10)
    assert rate_at(n, 0.01, 2.0, 10, "invn2") >= 0.9
    assert all(rate_at(n + k, 0.01, 2.0, 10, "invn2") >= 0.9 for k in (1, 2, 3))
    assert rate_at(n - 1, 0.01, 2.0, 10, "invn2") < 0.9


def test_min_population_unsatisfiable():
    with pytest.raises(UnsatisfiableError):
        min_population(1e-7, 0.9, 1.0, 10, n_cap=10**6)


@pytest.mark.parametrize("bad", [dict(frequency=0.0), dict(frequency=1.0), dict(target_rate=1.0), dict(target_rate=0.0)])
def test_min_population_validation(bad):
    kw = dict(frequency=0.01, target_rate=0.9, epsilon=2.0, L=10) | bad
    with pytest.raises(ParameterError):
        min_population(**kw)


def test_min_population_inv300n():
    n1 = min_population(0.01, 0.9, 2.0, 10, "inv300n")
    n2 = min_population(0.01, 0.9, 2.0, 10, "invn2")
    assert n1 <= n2


@pytest.mark.slow
def test_monte_carlo_reachable_regime():
    # W=1000 of n=10^4 gives a rate far from 0 and 1, unlike the W=200 acceptance case.
    ds = planted_dataset(10**4, "zebra", 1000, seed=3)
    params = choose_parameters(10**4, 10, 2.0, "invn2")
    p = discovery_rate(ds.n, params.m, params.theta, 1000, len("zebra$"))
    assert 0.2 < p < 0.5
    R = 2000
    hits = sum("zebra$" in run_single_word(ds, params, s, keep_rounds=False).words for s in range(R))
    lo, hi = stats.binom.interval(0.99, R, p)
    assert lo <= hits <= hi
