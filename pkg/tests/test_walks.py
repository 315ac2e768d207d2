"""Tests for the SIR jump chain, the coupled walks and walk diagnostics."""

import math

import numpy as np
import pytest
from scipy import stats

from infectree.lambertw import DomainError
from infectree.theory import t_lambda, z_lambda
from infectree.walks import (DIED_OUT, compute_J, coupled_walks, fluid_curve,
                             fluid_deviation, simulate_sir, sup_ratio_statistic,
                             survival)


def test_zero_susceptibles_dies_immediately():
    trace = simulate_sir(0, 0.5, rng=np.random.default_rng(0))
    assert list(trace.steps) == [-1]
    assert trace.tau == 1
    assert trace.absorbed
    assert not survival(trace, 0.5) or trace.n == 0  # floor(0*t)=0 <= tau


def test_single_susceptible_enumeration():
    # with n=1 the first step is +1 w.p. p = lam/(1+lam), then only -1 steps
    seen = set()
    for seed in range(200):
        trace = simulate_sir(1, 2.0, rng=np.random.default_rng(seed))
        seen.add(tuple(trace.steps))
    assert seen == {(-1,), (1, -1, -1)}


def test_trace_invariants():
    rng = np.random.default_rng(42)
    for _ in range(20):
        n = int(rng.integers(10, 2000))
        trace = simulate_sir(n, 2.0 / n, rng=rng)
        assert trace.walk[0] == 1
        assert np.array_equal(trace.walk[1:], 1 + np.cumsum(trace.steps))
        assert np.array_equal(trace.susceptibles,
                              n - np.concatenate([[0], np.cumsum(trace.steps == 1)]))
        assert trace.absorbed
        assert trace.tau <= 2 * n + 1
        assert trace.walk[trace.tau] == 0
        assert np.all(trace.walk[: trace.tau] > 0)


def test_first_step_frequency():
    n, lam = 50, 2.0
    p = lam / (1.0 + lam)  # lambda_n * n / (1 + lambda_n * n)
    rng = np.random.default_rng(7)
    hits = sum(simulate_sir(n, lam / n, horizon=1, rng=rng).steps[0] == 1
               for _ in range(20000))
    se = math.sqrt(p * (1 - p) / 20000)
    assert abs(hits / 20000 - p) <= 4 * se


def test_path_law_matches_between_constructions():
    """First-5-step sign paths of S^n agree in law with the SIR chain."""
    n, lam, runs = 1000, 2.0, 60000
    rng = np.random.default_rng(11)

    def path_key(signs):
        return sum((1 << i) for i, s in enumerate(signs) if s == 1)

    counts_sir = np.zeros(32, dtype=np.int64)
    counts_cpl = np.zeros(32, dtype=np.int64)
    for _ in range(runs):
        tr = simulate_sir(n, lam / n, horizon=5, rng=rng)
        if len(tr.steps) == 5:
            counts_sir[path_key(tr.steps)] += 1
        cw = coupled_walks(n, lam, 5, rng=rng)
        # restrict to the SIR chain's support: no absorption before step 5
        if np.all(cw.Sn[1:5] > 0):
            counts_cpl[path_key(np.diff(cw.Sn))] += 1
    table = np.vstack([counts_sir, counts_cpl])
    table = table[:, table.sum(axis=0) > 0]
    _, pvalue, _, _ = stats.chi2_contingency(table)
    assert pvalue > 0.001


def test_coupled_ordering():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(50, 5000))
        cw = coupled_walks(n, 2.0, 3 * n, rng=rng)
        assert np.all(cw.Sn_lower <= cw.Sn)
        assert np.all(cw.Sn <= cw.S)


def test_limit_walk_monotone_in_lambda():
    # larger lambda raises the +1 threshold; shared uniforms order the walks
    for seed in range(20):
        lo = coupled_walks(500, 1.5, 1000, rng=np.random.default_rng(seed))
        hi = coupled_walks(500, 2.5, 1000, rng=np.random.default_rng(seed))
        assert np.all(lo.S <= hi.S)


def test_epidemic_walk_tracks_limit_early():
    """S and S^n share steps until the susceptible depletion first matters."""
    rng = np.random.default_rng(3)
    gaps = []
    for _ in range(50):
        cw = coupled_walks(10**4, 2.0, 2000, rng=rng)
        diff = np.nonzero(cw.S != cw.Sn)[0]
        gaps.append(diff[0] if len(diff) else 2001)
    # disagreement needs a uniform to land in an O(k/n) window, so the first
    # disagreement time should frequently exceed sqrt(n)-ish scales
    assert np.median(gaps) > 50


def test_fluid_curve_endpoints():
    lam = 2.0
    s = np.array([0.0, t_lambda(lam)])
    vals = fluid_curve(lam, s)
    assert vals[0] == pytest.approx(0.0, abs=1e-12)
    assert vals[1] == pytest.approx(0.0, abs=1e-9)
    interior = fluid_curve(lam, np.linspace(0.1, t_lambda(lam) - 0.1, 50))
    assert np.all(interior > 0.0)


def test_fluid_deviation_small_on_survivors():
    n, lam = 10**5, 2.0
    found = 0
    for seed in range(30):
        trace = simulate_sir(n, lam / n, rng=np.random.default_rng(seed))
        dev = fluid_deviation(trace, lam, 1.2)
        if dev is DIED_OUT:
            continue
        found += 1
        assert dev <= 0.05
    assert found >= 5


def test_fluid_deviation_sentinel():
    # an immediately absorbed run cannot be compared over [0, 1.2]
    trace = simulate_sir(0, 0.5, rng=np.random.default_rng(0))
    assert fluid_deviation(trace, 2.0, 1.2) is DIED_OUT


def test_survival_thresholds():
    trace = simulate_sir(1000, 2.0 / 1000, rng=np.random.default_rng(123))
    assert survival(trace, 0.0)
    assert not survival(trace, (trace.tau + 1.5) / trace.n)


def test_compute_J_hand_walks():
    lam = 2.0
    thr = 2.0 * (math.exp(2.0 * z_lambda(lam)) + 1.0)   # about 11.29
    walk = np.arange(1, 101)   # S_j = j + 1 at index j? here S_j = j+1 -> walk[j]=j+1
    j = compute_J(walk, lam, 99)
    assert walk[j] <= thr < walk[j + 1]
    # a walk that never dips below the threshold has an empty index set
    tall = np.full(50, 100)
    assert compute_J(tall, lam, 49) == 50
    # non-positive walks yield the sentinel
    dead = np.array([1, 0, 1])
    assert compute_J(dead, lam, 2) is None


def test_sup_ratio_hand_values():
    all_plus = np.arange(1, 7)  # S_i = i + 1
    assert sup_ratio_statistic(all_plus) == pytest.approx(5.0 / 6.0)
    alternating = np.array([1, 2, 1, 2, 1])
    assert sup_ratio_statistic(alternating, horizon=4) == pytest.approx(4.0)


def test_sup_ratio_stable_in_horizon():
    rng = np.random.default_rng(9)
    short, long_ = [], []
    for _ in range(400):
        cw = coupled_walks(10**6, 2.0, 10**4, rng=rng)
        if np.all(cw.S > 0):
            short.append(sup_ratio_statistic(cw.S, horizon=10**3))
            long_.append(sup_ratio_statistic(cw.S, horizon=10**4))
    m_short, m_long = np.median(short), np.median(long_)
    assert abs(m_long - m_short) / m_long <= 0.10


def test_parameter_validation():
    with pytest.raises(DomainError):
        simulate_sir(-1, 0.5)
    with pytest.raises(DomainError):
        simulate_sir(10, 0.0)
    with pytest.raises(DomainError):
        coupled_walks(100, 1.0, 10)
