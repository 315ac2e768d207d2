"""The SIR step chain, coupled plus/minus-one walks and walk diagnostics.

A step of the epidemic is either an infection (+1, probability
lambda_n H / (1 + lambda_n H) given H remaining susceptibles) or a recovery
(-1).  Exactly one uniform is consumed per step, in step order, so coupled
constructions across lambda and across n can share a single uniform stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lambertw import DomainError, lambert_w0_array
from .theory import g_lambda, z_lambda

__all__ = [
    "InfectionTrace",
    "CoupledWalks",
    "simulate_sir",
    "coupled_walks",
    "fluid_deviation",
    "survival",
    "compute_J",
    "sup_ratio_statistic",
    "fluid_curve",
]

DIED_OUT = "died-out"


@dataclass(frozen=True)
class InfectionTrace:
    """One realized SIR run as its embedded jump chain."""

    n: int
    lambda_n: float
    steps: np.ndarray        # int8 signs X_k, length = number of steps taken
    walk: np.ndarray         # S_k = 1 + sum of signs, length len(steps)+1
    susceptibles: np.ndarray  # H_k, length len(steps)+1
    tau: int                 # first k with S_k = 0, or horizon if never absorbed
    absorbed: bool


@dataclass(frozen=True)
class CoupledWalks:
    """Three walks driven by one uniform stream: limit, epidemic, lower bound."""

    n: int
    lam: float
    horizon: int
    S: np.ndarray
    Sn: np.ndarray
    Sn_lower: np.ndarray


@njit(cache=True, nogil=True)
def _sir_kernel(n, lambda_n, horizon, uniforms):
    signs = np.empty(horizon, dtype=np.int8)
    H = n
    S = 1
    tau = horizon
    k = 0
    while k < horizon:
        p = lambda_n * H / (1.0 + lambda_n * H)
        if uniforms[k] <= p:
            signs[k] = 1
            H -= 1
            S += 1
        else:
            signs[k] = -1
            S -= 1
        k += 1
        if S == 0:
            tau = k
            break
    return signs[:k], tau


@njit(cache=True, nogil=True)
def _coupled_kernel(n, lam, horizon, uniforms):
    S = np.empty(horizon + 1, dtype=np.int64)
    Sn = np.empty(horizon + 1, dtype=np.int64)
    Sl = np.empty(horizon + 1, dtype=np.int64)
    S[0] = Sn[0] = Sl[0] = 1
    plus_count = 0
    for k in range(horizon):
        u = uniforms[k]
        # limit walk: constant threshold
        S[k + 1] = S[k] + (2 * (u <= lam / (1.0 + lam)) - 1)
        # epidemic walk: threshold from remaining susceptible fraction
        frac = lam * (1.0 - plus_count / n)
        up = u <= frac / (1.0 + frac)
        if up:
            plus_count += 1
        Sn[k + 1] = Sn[k] + (2 * up - 1)
        # lower walk: deterministic time-depleted threshold, clamped past n
        if k <= n:
            fl = lam * (1.0 - k / n)
            low_up = u <= fl / (1.0 + fl)
        else:
            low_up = False
        Sl[k + 1] = Sl[k] + (2 * low_up - 1)
    return S, Sn, Sl


def simulate_sir(n: int, lambda_n: float, horizon: int | None = None,
                 rng: np.random.Generator | None = None) -> InfectionTrace:
    """Run the embedded SIR jump chain to absorption or to `horizon` steps."""
    if n < 0:
        raise DomainError(f"simulate_sir: n={n} < 0")
    if lambda_n <= 0.0:
        raise DomainError(f"simulate_sir: lambda_n={lambda_n} <= 0")
    if rng is None:
        rng = np.random.default_rng()
    if horizon is None:
        horizon = 2 * n + 2
    uniforms = rng.random(horizon)
    signs, tau = _sir_kernel(n, lambda_n, horizon, uniforms)
    walk = np.empty(len(signs) + 1, dtype=np.int64)
    walk[0] = 1
    np.cumsum(signs, out=walk[1:])
    walk[1:] += 1
    susc = np.empty(len(signs) + 1, dtype=np.int64)
    susc[0] = n
    np.cumsum(signs == 1, out=susc[1:])
    susc[1:] = n - susc[1:]
    absorbed = tau < horizon or (len(signs) > 0 and walk[-1] == 0)
    return InfectionTrace(n=n, lambda_n=lambda_n, steps=signs, walk=walk,
                          susceptibles=susc, tau=int(tau), absorbed=bool(absorbed))


def coupled_walks(n: int, lam: float, horizon: int,
                  rng: np.random.Generator | None = None) -> CoupledWalks:
    """Build the (S, S^n, lower S^n) triple on a shared uniform stream."""
    if lam <= 1.0:
        raise DomainError(f"coupled_walks: lambda={lam} <= 1")
    if rng is None:
        rng = np.random.default_rng()
    uniforms = rng.random(horizon)
    S, Sn, Sl = _coupled_kernel(n, lam, horizon, uniforms)
    return CoupledWalks(n=n, lam=lam, horizon=horizon, S=S, Sn=Sn, Sn_lower=Sl)


def fluid_curve(lam: float, s: np.ndarray) -> np.ndarray:
    """Deterministic fluid limit max(2 - 2 g_lambda(s) - s, 0) of S^n/n."""
    s = np.asarray(s, dtype=float)
    g = lambert_w0_array(lam * np.exp(lam - lam * s)) / lam
    return np.maximum(2.0 - 2.0 * g - s, 0.0)


def fluid_deviation(trace: InfectionTrace, lam: float, t_max: float):
    """Sup-distance of the scaled infectious walk from its fluid limit.

    Evaluated on the grid s = k/n for s in [0, t_max]; returns the DIED_OUT
    sentinel when the run did not survive to n * t_max.
    """
    n = trace.n
    k_max = int(math.floor(n * t_max))
    if n == 0 or (trace.tau <= k_max and trace.absorbed):
        return DIED_OUT
    ks = np.arange(0, k_max + 1)
    s = ks / n
    curve = 2.0 - 2.0 * (lambert_w0_array(lam * np.exp(lam - lam * s)) / lam) - s
    return float(np.max(np.abs(trace.walk[ks] / n - curve)))


def survival(trace: InfectionTrace, t: float) -> bool:
    """True iff the epidemic lasted at least floor(n t) steps."""
    return trace.tau >= math.floor(trace.n * t)


def compute_J(walk: np.ndarray, lam: float, horizon: int):
    """Last index j <= horizon with (e^{2 z_lambda} + 1) / S_j >= 1/2.

    Returns horizon + 1 when the set is empty; returns None when the walk is
    not positive up to the horizon (the quantity is used only on survival).
    """
    walk = np.asarray(walk)
    horizon = min(horizon, len(walk) - 1)
    if np.any(walk[: horizon + 1] <= 0):
        return None
    threshold = 2.0 * (math.exp(2.0 * z_lambda(lam)) + 1.0)
    hits = np.nonzero(walk[: horizon + 1] <= threshold)[0]
    if len(hits) == 0:
        return horizon + 1
    return int(hits[-1])


def sup_ratio_statistic(walk: np.ndarray, horizon: int | None = None) -> float:
    """Finite-horizon sup of i / S_i over indices with S_i > 0."""
    walk = np.asarray(walk, dtype=float)
    if horizon is not None:
        walk = walk[: horizon + 1]
    idx = np.arange(len(walk), dtype=float)
    pos = walk > 0
    if not np.any(pos):
        return 0.0
    return float(np.max(idx[pos] / walk[pos]))
