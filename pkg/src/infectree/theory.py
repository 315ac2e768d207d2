"""Closed-form limit constants of the infection-tree model.

Everything here is a deterministic function of the infection rate multiplier
lambda > 1, built on the principal Lambert branch: the profile exponent
f_lambda and its positive root z_lambda, the subcritical offspring mean
m_lambda, the fluid extinction time t_lambda, the critical rate lambda_c and
the height constant kappa with its two branches.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .lambertw import DomainError, lambert_w0

__all__ = [
    "Regime",
    "TheoryConstants",
    "f_lambda",
    "z_lambda",
    "m_lambda",
    "g_lambda",
    "t_lambda",
    "h_lambda",
    "lambda_c",
    "kappa",
    "kappa_sup",
    "legendre_F",
    "constants_for",
]

# below this lambda, gamma = lambda/(lambda-1) blows up and Monte Carlo
# comparisons become numerics-limited
ILL_CONDITIONED_LAMBDA = 1.05


class Regime(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def _check_lambda(lam: float, minimum: float = 1.0, strict: bool = True) -> float:
    lam = float(lam)
    if (strict and lam <= minimum) or (not strict and lam < minimum):
        raise DomainError(f"lambda={lam} out of domain (requires lambda {'>' if strict else '>='} {minimum})")
    return lam


def f_lambda(lam: float, z):
    """f_lambda(z) = 1 + (lambda/(lambda-1)) (e^z - 1 - z e^z).

    Accepts real or complex z; decreasing in z on the positive reals.
    """
    lam = _check_lambda(lam)
    gamma = lam / (lam - 1.0)
    if isinstance(z, complex):
        ez = cmath.exp(z)
        return 1.0 + gamma * (ez - 1.0 - z * ez)
    ez = math.exp(z)
    return 1.0 + gamma * (ez - 1.0 - z * ez)


def z_lambda(lam: float) -> float:
    """Positive root of f_lambda: z_lambda = 1 + W(-1/(e lambda))."""
    lam = _check_lambda(lam)
    return 1.0 + lambert_w0(-1.0 / (math.e * lam))


def m_lambda(lam: float) -> float:
    """Dangling-tree offspring mean m_lambda = -W(-lambda e^{-lambda}), in (0, 1]."""
    lam = _check_lambda(lam, strict=False)
    return -lambert_w0(-lam * math.exp(-lam))


def g_lambda(lam: float, t: float) -> float:
    """Fluid-limit susceptible fraction g_lambda(t) = W(lambda e^{lambda - lambda t}) / lambda."""
    lam = _check_lambda(lam)
    if t < 0.0:
        raise DomainError(f"g_lambda: t={t} < 0")
    return lambert_w0(lam * math.exp(lam - lam * t)) / lam


def t_lambda(lam: float) -> float:
    """Fluid extinction time, closed form t_lambda = 2 - 2 m_lambda / lambda."""
    lam = _check_lambda(lam)
    return 2.0 - 2.0 * m_lambda(lam) / lam


def h_lambda(lam: float, x: float) -> float:
    """Dangling height exponent h_lambda(x) = f_lambda(x) / (-log m_lambda)."""
    lam = _check_lambda(lam)
    return f_lambda(lam, x) / (-math.log(m_lambda(lam)))


@lru_cache(maxsize=1)
def lambda_c() -> float:
    """Unique root > 1 of m_lambda = e^{-z_lambda}, by bisection.

    The auxiliary map u(lam) = 1/m_lambda - e^{z_lambda} is convex with
    u(1) = 0 and u(+inf) = +inf, so any bracket with a sign change right of
    1 isolates the root.  The bracket [1.2, 3.0] is sign-checked on entry.
    """
    def u(lam: float) -> float:
        return 1.0 / m_lambda(lam) - math.exp(z_lambda(lam))

    lo, hi = 1.2, 3.0
    if not (u(lo) < 0.0 < u(hi)):
        raise RuntimeError("lambda_c bracket lost its sign change")
    while hi - lo > 1e-11:
        mid = 0.5 * (lo + hi)
        if u(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kappa(lam: float) -> float:
    """Limiting height constant; two branches meeting tangentially at lambda_c."""
    lam = _check_lambda(lam)
    gamma = lam / (lam - 1.0)
    if lam <= lambda_c():
        m = m_lambda(lam)
        lm = -math.log(m)
        return gamma / m + f_lambda(lam, lm) / lm
    return gamma * math.exp(z_lambda(lam))


def kappa_sup(lam: float) -> tuple[float, float]:
    """Height constant as sup over s in [0, z_lambda] of gamma e^s + h_lambda(s).

    Returns (value, argmax).  The objective increases up to -log m_lambda and
    decreases after, so the argmax is min(-log m_lambda, z_lambda); a
    golden-section pass cross-checks the analytic maximizer.
    """
    lam = _check_lambda(lam)
    gamma = lam / (lam - 1.0)
    z = z_lambda(lam)
    lm = -math.log(m_lambda(lam))

    def objective(s: float) -> float:
        return gamma * math.exp(s) + h_lambda(lam, s)

    s_star = min(lm, z)
    # golden-section refinement over [0, z]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, z
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(200):
        if b - a < 1e-13:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    s_golden = 0.5 * (a + b)
    value = max(objective(s_star), objective(s_golden), objective(0.0), objective(z))
    return value, s_star


def legendre_F(lam: float, theta: float) -> float:
    """Legendre transform of the Poisson(gamma) cumulant: theta log(theta/gamma) - theta + gamma."""
    lam = _check_lambda(lam)
    theta = float(theta)
    if theta <= 0.0:
        raise DomainError(f"legendre_F: theta={theta} <= 0")
    gamma = lam / (lam - 1.0)
    return theta * math.log(theta / gamma) - theta + gamma


@dataclass(frozen=True)
class TheoryConstants:
    """Immutable per-lambda bundle of the model's limit constants."""

    lam: float
    gamma: float
    z_lambda: float
    m_lambda: float
    t_lambda: float
    kappa: float
    regime: Regime
    ill_conditioned: bool

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "gamma": self.gamma,
            "z_lambda": self.z_lambda,
            "m_lambda": self.m_lambda,
            "t_lambda": self.t_lambda,
            "kappa": self.kappa,
            "regime": self.regime.value,
            "ill_conditioned": self.ill_conditioned,
            "lambda_c": lambda_c(),
        }


@lru_cache(maxsize=4096)
def constants_for(lam: float) -> TheoryConstants:
    lam = _check_lambda(lam)
    lc = lambda_c()
    if abs(lam - lc) < 1e-12:
        regime = Regime.CRITICAL
    elif lam < lc:
        regime = Regime.SUBCRITICAL
    else:
        regime = Regime.SUPERCRITICAL
    return TheoryConstants(
        lam=lam,
        gamma=lam / (lam - 1.0),
        z_lambda=z_lambda(lam),
        m_lambda=m_lambda(lam),
        t_lambda=t_lambda(lam),
        kappa=kappa(lam),
        regime=regime,
        ill_conditioned=lam <= ILL_CONDITIONED_LAMBDA,
    )
