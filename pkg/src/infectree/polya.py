"""Time-dependent two-color urn with removals.

At step k+1 a ball is drawn uniformly; with X_{k+1} >= 0 that many copies of
its color are added, with X_{k+1} = -1 the drawn ball is removed.  The red
proportion R_k/s_k is a martingale, and its second moment obeys an exact
linear recursion with a closed-form product solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lambertw import DomainError

__all__ = [
    "UrnState",
    "UrnTrajectory",
    "urn_step",
    "moment_recursion",
    "moment_closed_form",
    "proportion_run",
    "proportion_ensemble",
    "Criterion",
    "TailRule",
    "bernoulli_criterion",
]


@dataclass(frozen=True)
class UrnState:
    red: int
    total: int

    def __post_init__(self):
        if self.total < 1:
            raise DomainError(f"UrnState: total={self.total} < 1")
        if not 0 <= self.red <= self.total:
            raise DomainError(f"UrnState: red={self.red} outside [0, {self.total}]")

    @property
    def proportion(self) -> float:
        return self.red / self.total


@dataclass(frozen=True)
class UrnTrajectory:
    r0: int
    b0: int
    replacement: np.ndarray   # X_k, k >= 1
    R: np.ndarray             # red counts R_0..R_k
    s: np.ndarray             # totals s_0..s_k
    draws: np.ndarray         # B_k indicator of drawing red, k >= 1

    def proportions(self) -> np.ndarray:
        return self.R / self.s

    def red_draw_average(self) -> np.ndarray:
        """(1/k) sum of B_i for k = 1..len, the drawn-red running frequency."""
        k = np.arange(1, len(self.draws) + 1)
        return np.cumsum(self.draws) / k


def _check_replacement(s0: int, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    if np.any(xs < -1):
        raise DomainError("replacement entries must be >= -1")
    totals = s0 + np.cumsum(xs)
    if np.any(totals < 1):
        raise DomainError("replacement sequence drives the urn below one ball")
    return xs


def urn_step(state: UrnState, x: int, rng: np.random.Generator) -> tuple[UrnState, int]:
    """One draw-and-replace step; returns (new state, red-draw indicator)."""
    if x < -1:
        raise DomainError(f"urn_step: x={x} < -1")
    if state.total + x < 1:
        raise DomainError("urn_step: removal would empty the urn")
    drew_red = 1 if rng.random() < state.red / state.total else 0
    red = state.red + x * drew_red
    return UrnState(red=red, total=state.total + x), drew_red


def proportion_run(r0: int, b0: int, replacement, rng: np.random.Generator) -> UrnTrajectory:
    """Simulate the urn along a replacement sequence."""
    s0 = r0 + b0
    xs = _check_replacement(s0, replacement)
    k_max = len(xs)
    R = np.empty(k_max + 1, dtype=np.int64)
    s = np.empty(k_max + 1, dtype=np.int64)
    draws = np.empty(k_max, dtype=np.int64)
    R[0], s[0] = r0, s0
    state = UrnState(red=r0, total=s0)
    for k, x in enumerate(xs):
        state, b = urn_step(state, int(x), rng)
        R[k + 1], s[k + 1], draws[k] = state.red, state.total, b
    return UrnTrajectory(r0=r0, b0=b0, replacement=xs, R=R, s=s, draws=draws)


def moment_recursion(r0: int, b0: int, replacement, k_max: int | None = None) -> np.ndarray:
    """Exact u_k = E[(R_k/s_k)^2] by forward recursion.

    u_{k+1} = (1 - X^2_{k+1}/s^2_{k+1}) u_k + (r0/s0) X^2_{k+1}/s^2_{k+1}.
    """
    s0 = r0 + b0
    xs = _check_replacement(s0, replacement)
    if k_max is None:
        k_max = len(xs)
    if k_max > len(xs):
        raise DomainError(f"moment_recursion: k_max={k_max} exceeds sequence length")
    mean = r0 / s0
    u = np.empty(k_max + 1)
    u[0] = mean**2
    s = float(s0)
    for k in range(k_max):
        s += xs[k]
        w = (xs[k] / s) ** 2
        u[k + 1] = (1.0 - w) * u[k] + mean * w
    return u


def moment_closed_form(r0: int, b0: int, replacement, k_max: int | None = None) -> np.ndarray:
    """u_k = r0/s0 + ((r0/s0)^2 - r0/s0) * prod_{j<=k} (1 - X_j^2/s_j^2)."""
    s0 = r0 + b0
    xs = _check_replacement(s0, replacement)
    if k_max is None:
        k_max = len(xs)
    mean = r0 / s0
    totals = s0 + np.cumsum(xs[:k_max])
    factors = 1.0 - (xs[:k_max] / totals) ** 2
    prods = np.concatenate([[1.0], np.cumprod(factors)])
    return mean + (mean**2 - mean) * prods


def proportion_ensemble(r0: int, b0: int, replacement, replicas: int,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Terminal proportions and red-draw frequencies over independent replicas.

    Vectorized across replicas (the totals s_k are deterministic, so only the
    red counts need per-replica state).  Returns (R_k/s_k, mean of B_i).
    """
    s0 = r0 + b0
    xs = _check_replacement(s0, replacement)
    if replicas < 1:
        raise DomainError(f"proportion_ensemble: replicas={replicas} < 1")
    R = np.full(replicas, float(r0))
    s = float(s0)
    draw_sum = np.zeros(replicas)
    for x in xs:
        b = rng.random(replicas) < R / s
        R += float(x) * b
        s += float(x)
        draw_sum += b
    if len(xs) == 0:
        return R / s, np.full(replicas, r0 / s0)
    return R / s, draw_sum / len(xs)


class Criterion(Enum):
    BERNOULLI = "bernoulli"
    NON_BERNOULLI = "non-bernoulli"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class TailRule:
    """Declared behavior of the replacement sequence beyond its prefix.

    kind is one of:
      "constant"    - X_k = value forever (value >= 0);
      "alternating" - X alternates +1, -1 (totals oscillate, bounded);
      "bounded"     - |X_k| <= bound with s_k >= slope * k eventually;
      "none"        - nothing declared (finite prefix only).
    """

    kind: str
    value: int = 0
    bound: int = 0
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "alternating", "bounded", "none"):
            raise DomainError(f"TailRule: unknown kind {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise DomainError("TailRule: constant tails must have value >= 0")
        if self.kind == "bounded" and (self.bound < 0 or self.slope <= 0.0):
            raise DomainError("TailRule: bounded tails need bound >= 0, slope > 0")


def bernoulli_criterion(prefix, s0: int, tail: TailRule) -> tuple[Criterion, float]:
    """Decide whether the limit proportion Z must be Bernoulli.

    Z is Bernoulli iff prod (1 - X_j^2/s_j^2) = 0, equivalently NOT
    (s_k >= 2 for all k and sum (X_k/s_k)^2 < infinity).  Returns the
    decision plus the partial product over the prefix.
    """
    xs = _check_replacement(s0, prefix)
    totals = s0 + np.cumsum(xs)
    partial = float(np.prod(1.0 - (xs / totals) ** 2)) if len(xs) else 1.0
    all_totals = np.concatenate([[s0], totals])
    s_end = int(all_totals[-1])

    if np.any(all_totals < 2):
        # a removal can empty one color for good once a single ball remains
        return Criterion.BERNOULLI, partial
    if partial == 0.0:
        return Criterion.BERNOULLI, partial

    if tail.kind == "none":
        return Criterion.UNDECIDED, partial
    if tail.kind == "constant":
        if tail.value == 0:
            # sum of finitely many nonzero terms converges
            return Criterion.NON_BERNOULLI, partial
        # s_k grows linearly, terms ~ (value/(value k))^2 summable
        return Criterion.NON_BERNOULLI, partial
    if tail.kind == "alternating":
        if s_end <= 2:
            # totals oscillate through 2 and below: divergent series or s_k = 1
            return Criterion.BERNOULLI, partial
        # bounded totals, nonvanishing terms: sum (X_k/s_k)^2 diverges
        return Criterion.BERNOULLI, partial
    # bounded increments over linearly growing totals: summable
    return Criterion.NON_BERNOULLI, partial
