"""Acceptance gate: one test per headline claim, with pinned seeds.

Each test is a self-contained pass/fail check of one numerical or
statistical guarantee the package makes.  Tolerances are part of the
contract and must not be loosened to make a failing check pass.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from infectree.couplings import (GeomOffspring, harris_height_tail,
                                 height_tail_dp, sandwich_coupling)
from infectree.freezetree import (FreezeTree, build_from_signs, fourier_invert,
                                  one_step_expectation_check)
from infectree.harness import (ExperimentConfig, run_dangling, run_fluid,
                               run_height, run_profile, run_survival)
from infectree.lambertw import (BRANCH_POINT, exp_decay_series_bounds,
                                lambert_w0, lambert_w0_array,
                                lower_bound_branch, lower_bound_lambda,
                                radical_lower_bound)
from infectree.polya import moment_closed_form, moment_recursion
from infectree.theory import (constants_for, f_lambda, g_lambda, kappa,
                              kappa_sup, lambda_c, legendre_F, m_lambda,
                              t_lambda, z_lambda)


def test_criterion_lambert_solver_and_certified_bounds():
    """Residual <= 1e-12 rel on 1e4 points; all lower bounds hold; < 1 s."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240817)
    xs = BRANCH_POINT + (1000.0 - BRANCH_POINT) * rng.random(10**4)
    ws = lambert_w0_array(xs)
    residual = np.abs(ws * np.exp(ws) - xs) / np.maximum(1.0, np.abs(xs))
    assert residual.max() <= 1e-12

    grid = np.linspace(BRANCH_POINT, 0.0, 10**4)
    w_grid = lambert_w0_array(grid)
    branch_viol = sum(lower_bound_branch(float(x)) > w + 1e-15
                      for x, w in zip(grid, w_grid))
    assert branch_viol == 0

    lams = np.linspace(1.0, 50.0, 10**4)
    w_lam = lambert_w0_array(-lams * np.exp(-lams))
    lam_viol = sum(lower_bound_lambda(float(l)) > w + 1e-15
                   for l, w in zip(lams, w_lam))
    assert lam_viol == 0

    series_viol = radical_viol = 0
    for h in np.linspace(0.0, 10.0, 10**4):
        h = float(h)
        lo, hi = exp_decay_series_bounds(h)
        v = math.exp(-h) * (1.0 + h)
        eps = 4e-16 * (1.0 + abs(v))
        series_viol += not (lo <= v + eps and v <= hi + eps)
        if h <= 1.0:
            target = math.sqrt(max(2.0 - 2.0 * v, 0.0))
            radical_viol += radical_lower_bound(h) > target + 1e-11
    assert series_viol == 0 and radical_viol == 0
    assert time.perf_counter() - start < 1.0


def test_criterion_critical_rate():
    """lambda_c = 1.8038 +/- 5e-4, root residual <= 1e-7, branches <= 1e-8."""
    lc = lambda_c()
    assert abs(lc - 1.8038) <= 5e-4
    assert abs(f_lambda(lc, -math.log(m_lambda(lc)))) <= 1e-7
    gamma = lc / (lc - 1.0)
    m = m_lambda(lc)
    lm = -math.log(m)
    low_branch = gamma / m + f_lambda(lc, lm) / lm
    high_branch = gamma * math.exp(z_lambda(lc))
    assert abs(low_branch - high_branch) <= 1e-8


def test_criterion_identity_suite():
    """Closed-form identities hold to 1e-8 on 100-point rate grids."""
    for lam in np.linspace(1.1, 6.0, 100):
        lam = float(lam)
        m = m_lambda(lam)
        assert abs(m * math.exp(-m) - lam * math.exp(-lam)) <= 1e-8
        t = t_lambda(lam)
        assert abs(2.0 - 2.0 * g_lambda(lam, t) - t) <= 1e-8
        assert abs(m - lam * g_lambda(lam, t)) <= 1e-8
        gamma = lam / (lam - 1.0)
        for x in (0.1, 0.3, 0.5):
            assert abs(-legendre_F(lam, gamma * math.exp(x))
                       - (f_lambda(lam, x) - 1.0)) <= 1e-8
        value, _ = kappa_sup(lam)
        assert abs(value - kappa(lam)) <= 1e-8


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.0])
def test_criterion_survival_probability(lam):
    """Survival frequency within 3 sigma of 1 - 1/lambda at n = 1e5."""
    config = ExperimentConfig(kind="survival", lam=lam, n=10**5,
                              replicas=2000, seed=1, threads=8)
    _, summary = run_survival(config)
    p = 1.0 - 1.0 / lam
    se = math.sqrt(p * (1.0 - p) / config.replicas)
    assert abs(summary["survived"]["mean"] - p) <= 3.0 * se


def test_criterion_fluid_limit():
    """50+ surviving runs at n = 1e6 stay within 0.02 of the fluid curve."""
    config = ExperimentConfig(kind="fluid", lam=2.0, n=10**6,
                              replicas=120, t=1.2, seed=2, threads=8)
    _, summary = run_fluid(config)
    assert summary["surviving"] >= 50
    assert summary["deviation_le_002_frac"] >= 0.90


def test_criterion_profile_exponent():
    """Mean band exponent within f_2(x) +/- 0.15 at n = 1e6, x in the grid."""
    config = ExperimentConfig(kind="profile", lam=2.0, n=10**6, t=1.0,
                              replicas=220, seed=3, threads=8,
                              x_grid=(0.2, 0.4, 0.6))
    _, summary = run_profile(config)
    assert summary["surviving"] >= 100
    for x in config.x_grid:
        target = summary[f"f_lambda_x{x}"]
        assert abs(summary[f"mean_exponent_x{x}"] - target) <= 0.15


def test_criterion_height_scaling_and_argmax_switch():
    """Conditional median height/log n approaches kappa; argmax switches."""
    for lam in (1.5, 2.0, 5.0):
        medians = []
        for n in (10**4, 10**5, 10**6):
            config = ExperimentConfig(kind="height", lam=lam, n=n,
                                      replicas=200, seed=9, threads=8)
            _, summary = run_height(config)
            medians.append(summary["conditional_median"])
        assert medians[0] < medians[1] < medians[2]
        assert abs(medians[2] - kappa(lam)) <= 1.25

    # below the critical rate the argmax anchor sits inside the snapshot
    # tree; above it the snapshot height itself dominates
    low = run_dangling(ExperimentConfig(kind="dangling", lam=1.5, n=10**5,
                                        replicas=200, seed=9, threads=8))[1]
    high = run_dangling(ExperimentConfig(kind="dangling", lam=5.0, n=10**5,
                                         replicas=200, seed=9, threads=8))[1]
    assert low["interior_argmax_frac"] > 0.3
    assert high["interior_argmax_frac"] < 0.1
    assert low["interior_argmax_frac"] > high["interior_argmax_frac"] + 0.3
    assert high["snapshot_dominates_frac"] > 0.9


def test_criterion_exact_identity_suites():
    """One-step, inversion, urn and tail identities at machine precision."""
    rng = np.random.default_rng(13)

    def random_tree(steps):
        t = FreezeTree()
        for _ in range(steps):
            sign = 1 if (t.n_active <= 1 or rng.random() < 0.7) else -1
            t.grow_step(sign, rng.random())
        return t

    worst = 0.0
    done = 0
    while done < 10**4:
        t = random_tree(int(rng.integers(2, 25)))
        if t.n_active == 0:
            continue
        sign = 1 if (t.n_active == 1 or rng.random() < 0.5) else -1
        z = complex(rng.normal(0, 0.5), rng.normal(0, 0.5))
        _, rhs, res = one_step_expectation_check(t, sign, z)
        worst = max(worst, res / (1.0 + abs(rhs)))
        done += 1
    assert worst <= 1e-12

    for _ in range(10**3):
        t = random_tree(int(rng.integers(5, 40)))
        if t.n_active == 0:
            continue
        prof = t.active_profile()
        total = prof.total()
        for k in range(max(prof.counts) + 1):
            direct = prof.counts.get(k, 0) / total
            assert abs(fourier_invert(t, 0.4, k) - direct) <= 1e-10

    worst_urn = 0.0
    for _ in range(10**4):
        s = int(rng.integers(2, 10**6))
        r = int(rng.integers(0, s + 1))
        x = int(rng.integers(-1, 20))
        if s + x < 1:
            continue
        p = r / s
        e = p * (r + x) / (s + x) + (1 - p) * r / (s + x)
        worst_urn = max(worst_urn, abs(e - p))
    assert worst_urn <= 1e-14

    for _ in range(50):
        xs = rng.integers(-1, 4, size=60)
        if np.any(10 + np.cumsum(xs) < 1):
            continue
        gap = np.abs(moment_recursion(3, 7, xs) - moment_closed_form(3, 7, xs))
        assert gap.max() <= 1e-14

    for r in (0.55, 0.6, 2 / 3, 0.75, 0.9):
        for n in range(61):
            assert abs(harris_height_tail(r, n) - height_tail_dp(r, n)) <= 1e-12


def test_criterion_coupling_demonstrations():
    """Structural inclusions on 1e3 runs; offspring chi-square at 1e5 samples."""
    for seed in range(10**3):
        rng = np.random.default_rng(seed)
        res = sandwich_coupling(5, 0.6, 0.8, lambda k, xs: 0.7, rng)
        assert res.event_E and res.check_inclusions()

    for which, s_param in (("upper", 0.6), ("lower", 0.8)):
        counts = []
        total = 0
        seed = 0
        while total < 10**5:
            rng = np.random.default_rng(2 * 10**6 + seed)
            res = sandwich_coupling(5, 0.6, 0.8, lambda k, xs: 0.7, rng)
            c = res.offspring_counts(which)
            counts.append(c)
            total += len(c)
            seed += 1
        counts = np.concatenate(counts)
        kmax = int(counts.max())
        observed = np.bincount(counts, minlength=kmax + 1).astype(float)
        law = GeomOffspring(s_param)
        expected = np.array([law.pmf(k) for k in range(kmax + 1)])
        expected[-1] = 1.0 - expected[:-1].sum()
        expected *= len(counts)
        while len(expected) > 2 and expected[-1] < 5:
            expected[-2] += expected[-1]
            observed[-2] += observed[-1]
            expected, observed = expected[:-1], observed[:-1]
        _, pvalue = stats.chisquare(observed, expected)
        assert pvalue > 0.001


def test_criterion_determinism_across_threads(tmp_path):
    """sim-height CSV output is byte-identical for 1 and 8 worker threads."""
    outputs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        cmd = ["infectree", "sim-height", "--lambda", "2.0", "--n", "10000",
               "--replicas", "20", "--seed", "3", "--threads", str(threads),
               "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "sim_height.csv").read_bytes())
    assert outputs[0] == outputs[1]
