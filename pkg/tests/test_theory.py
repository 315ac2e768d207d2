"""Tests for the closed-form limit constants and their cross-identities."""

import cmath
import math

import numpy as np
import pytest

from infectree.lambertw import DomainError
from infectree.theory import (Regime, constants_for, f_lambda, g_lambda,
                              h_lambda, kappa, kappa_sup, lambda_c,
                              legendre_F, m_lambda, t_lambda, z_lambda)

# oracle constants frozen from 30-digit root finding done before the build
Z2 = 0.768039047013465565
Z5 = 0.920321839488523486
M2 = 0.406375739959959908
M15 = 0.625782534201282921
M5 = 0.0348857682557236963
T2 = 1.593624260040040092
LAMBDA_C = 1.803835910956190778
KAPPA2 = 4.311070407001005035
KAPPA15 = 5.960498345793944642
KAPPA5 = 3.137622635803584201

LAM_GRID = np.linspace(1.1, 8.0, 100)


def bisect_root(f, lo, hi, tol=1e-12):
    assert f(lo) * f(hi) < 0.0
    increasing = f(hi) > 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0.0) == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_f_anchor_values():
    assert f_lambda(2.0, 0.0) == 1.0
    assert f_lambda(2.0, 1.0) == pytest.approx(-1.0, abs=1e-12)
    for lam in (1.5, 2.0, 5.0):
        assert f_lambda(lam, z_lambda(lam)) == pytest.approx(0.0, abs=1e-9)


def test_f_complex_consistency():
    z = 0.4 + 0.3j
    direct = 1.0 + 2.0 * (cmath.exp(z) - 1.0 - z * cmath.exp(z))
    assert f_lambda(2.0, z) == pytest.approx(direct, abs=1e-13)


def test_f_decreasing_on_positive_axis():
    # f'(z) = -gamma z e^z < 0 for z > 0; finite differences agree
    for lam in (1.3, 2.0, 4.0):
        gamma = lam / (lam - 1.0)
        for z in np.linspace(0.05, 1.2, 30):
            z = float(z)
            fd = (f_lambda(lam, z + 1e-6) - f_lambda(lam, z - 1e-6)) / 2e-6
            assert fd < 0.0
            assert fd == pytest.approx(-gamma * z * math.exp(z), rel=1e-5)


def test_z_lambda_against_bisection():
    assert z_lambda(2.0) == pytest.approx(Z2, abs=1e-12)
    assert z_lambda(5.0) == pytest.approx(Z5, abs=1e-12)
    for lam in (1.2, 1.8, 3.0, 7.0):
        root = bisect_root(lambda z: f_lambda(lam, z), 1e-6, 1.0)
        assert z_lambda(lam) == pytest.approx(root, abs=1e-9)


def test_z_lambda_vanishes_at_one():
    assert z_lambda(1.0 + 1e-9) < 1e-3


def test_m_lambda_values_and_range():
    assert m_lambda(2.0) == pytest.approx(M2, abs=1e-12)
    assert m_lambda(1.5) == pytest.approx(M15, abs=1e-12)
    assert m_lambda(5.0) == pytest.approx(M5, abs=1e-12)
    for lam in LAM_GRID:
        m = m_lambda(float(lam))
        assert 0.0 < m < 1.0
        assert m * math.exp(-m) == pytest.approx(lam * math.exp(-lam), abs=1e-10)


def test_t_lambda_is_fluid_root():
    assert t_lambda(2.0) == pytest.approx(T2, abs=1e-12)
    for lam in LAM_GRID:
        lam = float(lam)
        t = t_lambda(lam)
        assert abs(2.0 - 2.0 * g_lambda(lam, t) - t) <= 1e-9


def test_m_equals_lambda_g_at_extinction():
    for lam in LAM_GRID:
        lam = float(lam)
        assert m_lambda(lam) == pytest.approx(lam * g_lambda(lam, t_lambda(lam)), abs=1e-8)


def test_lambda_c_value_and_defining_equation():
    lc = lambda_c()
    assert lc == pytest.approx(LAMBDA_C, abs=5e-4)
    assert abs(1.0 / m_lambda(lc) - math.exp(z_lambda(lc))) <= 1e-7
    # at the critical rate the kappa argmax collides with z_lambda
    assert abs(f_lambda(lc, -math.log(m_lambda(lc)))) <= 1e-7


def test_kappa_branches_agree_at_critical_rate():
    lc = lambda_c()
    gamma = lc / (lc - 1.0)
    m = m_lambda(lc)
    lm = -math.log(m)
    sub = gamma / m + f_lambda(lc, lm) / lm
    sup = gamma * math.exp(z_lambda(lc))
    assert abs(sub - sup) <= 1e-8


def test_kappa_anchor_values():
    assert kappa(2.0) == pytest.approx(KAPPA2, abs=1e-10)
    assert kappa(1.5) == pytest.approx(KAPPA15, abs=1e-10)
    assert kappa(5.0) == pytest.approx(KAPPA5, abs=1e-10)


def test_kappa_sup_form_matches_branch_form():
    for lam in LAM_GRID:
        lam = float(lam)
        value, s_star = kappa_sup(lam)
        assert value == pytest.approx(kappa(lam), abs=1e-8)
        assert s_star == pytest.approx(
            min(-math.log(m_lambda(lam)), z_lambda(lam)), abs=1e-12)


def test_legendre_identity():
    # -F(gamma e^x) = f_lambda(x) - 1
    for lam in (1.4, 2.0, 3.5):
        gamma = lam / (lam - 1.0)
        for x in np.linspace(0.05, 1.0, 50):
            x = float(x)
            assert -legendre_F(lam, gamma * math.exp(x)) == pytest.approx(
                f_lambda(lam, x) - 1.0, abs=1e-10)


def test_legendre_minimum_at_gamma():
    for lam in (1.5, 2.0, 5.0):
        gamma = lam / (lam - 1.0)
        assert legendre_F(lam, gamma) == pytest.approx(0.0, abs=1e-12)
        assert legendre_F(lam, gamma * 1.2) > 0.0
        assert legendre_F(lam, gamma * 0.8) > 0.0


def test_regime_trichotomy():
    assert constants_for(1.5).regime is Regime.SUBCRITICAL
    assert constants_for(5.0).regime is Regime.SUPERCRITICAL
    assert constants_for(lambda_c()).regime is Regime.CRITICAL


def test_constants_bundle_invariants():
    for lam in (1.2, 1.9, 2.5, 6.0):
        c = constants_for(lam)
        assert c.gamma == pytest.approx(lam / (lam - 1.0))
        assert abs(f_lambda(lam, c.z_lambda)) <= 1e-9
        assert 0.0 < c.m_lambda < 1.0
        assert c.t_lambda > 0.0
        assert c.kappa > 0.0
        # regime boundary is the m = e^{-z} balance
        if c.regime is Regime.SUBCRITICAL:
            assert c.m_lambda > math.exp(-c.z_lambda)
        elif c.regime is Regime.SUPERCRITICAL:
            assert c.m_lambda < math.exp(-c.z_lambda)


def test_h_lambda_scaling():
    lam = 2.0
    lm = -math.log(m_lambda(lam))
    assert h_lambda(lam, 0.0) == pytest.approx(1.0 / lm, abs=1e-12)
    assert h_lambda(lam, z_lambda(lam)) == pytest.approx(0.0, abs=1e-9)


def test_domain_errors():
    for fn in (z_lambda, t_lambda, kappa):
        with pytest.raises(DomainError):
            fn(1.0)
    with pytest.raises(DomainError):
        f_lambda(0.8, 0.5)
    with pytest.raises(DomainError):
        g_lambda(2.0, -0.1)
    with pytest.raises(DomainError):
        legendre_F(2.0, 0.0)
