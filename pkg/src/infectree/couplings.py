"""Geometric-offspring branching trees and the three-forest sandwich coupling.

Offspring law G(s): P(k) = s(1-s)^k on k >= 0, mean 1/s - 1, subcritical for
s > 1/2.  The sandwich construction grows a lower forest (freeze probability
q), a history-dependent middle forest (freeze probability r_k supplied by a
callback) and an upper forest (freeze probability p) from one shared uniform
stream, so that the inclusions lower <= middle <= upper hold whenever every
realized r_k stays inside [p, q].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lambertw import DomainError

__all__ = [
    "GeomOffspring",
    "BienaymeTree",
    "sample_bienayme",
    "bienayme_heights",
    "dangling_forest_height",
    "harris_height_tail",
    "height_tail_dp",
    "SandwichResult",
    "sandwich_coupling",
    "NodeCapError",
]


class NodeCapError(RuntimeError):
    """Sampling exceeded the node budget (possible supercritical explosion)."""


@dataclass(frozen=True)
class GeomOffspring:
    """Geometric offspring law on the nonnegative integers."""

    s: float

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise DomainError(f"GeomOffspring: s={self.s} outside (0, 1]")

    @property
    def mean(self) -> float:
        return 1.0 / self.s - 1.0

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        return self.s * (1.0 - self.s) ** k

    def sample(self, rng: np.random.Generator, size=None):
        # numpy's geometric counts trials up to the first success
        return rng.geometric(self.s, size=size) - 1


@dataclass(frozen=True)
class BienaymeTree:
    """Branching tree in BFS order: parent[0] = -1, children contiguous."""

    parent: np.ndarray
    height: np.ndarray
    offspring: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def tree_height(self) -> int:
        return int(self.height.max())


def sample_bienayme(s: float, rng: np.random.Generator,
                    node_cap: int = 10**7) -> BienaymeTree:
    """Breadth-first branching tree with G(s) offspring."""
    law = GeomOffspring(s)
    parent = [-1]
    height = [0]
    offspring = []
    frontier = [0]
    while frontier:
        counts = law.sample(rng, size=len(frontier))
        offspring.extend(int(c) for c in counts)
        nxt = []
        for v, c in zip(frontier, counts):
            for _ in range(int(c)):
                parent.append(v)
                height.append(height[v] + 1)
                nxt.append(len(parent) - 1)
        if len(parent) > node_cap:
            raise NodeCapError(f"sample_bienayme: exceeded node_cap={node_cap}")
        frontier = nxt
    return BienaymeTree(parent=np.array(parent, dtype=np.int64),
                        height=np.array(height, dtype=np.int64),
                        offspring=np.array(offspring, dtype=np.int64))


def bienayme_heights(count: int, s: float, rng: np.random.Generator,
                     node_cap: int = 10**7) -> np.ndarray:
    """Heights of `count` independent G(s) trees, via generation sizes.

    Generation totals evolve as Z_{g+1} ~ NegativeBinomial(Z_g, s), the sum
    of Z_g independent G(s) draws, so only sizes are simulated.
    """
    GeomOffspring(s)
    sizes = np.ones(count, dtype=np.int64)
    heights = np.zeros(count, dtype=np.int64)
    total = count
    g = 0
    while True:
        alive = sizes > 0
        if not np.any(alive):
            return heights
        nxt = np.zeros_like(sizes)
        nxt[alive] = rng.negative_binomial(sizes[alive], s)
        total += int(nxt.sum())
        if total > node_cap:
            raise NodeCapError(f"bienayme_heights: exceeded node_cap={node_cap}")
        g += 1
        heights[nxt > 0] = g
        sizes = nxt


def dangling_forest_height(count: int, s: float, rng: np.random.Generator,
                           node_cap: int = 10**7) -> int:
    """Max height over a forest of `count` independent G(s) trees."""
    if s <= 0.5:
        raise DomainError(f"dangling_forest_height: s={s} <= 1/2")
    return int(bienayme_heights(count, s, rng, node_cap=node_cap).max())


def harris_height_tail(r: float, n: int) -> float:
    """P(Height >= n) for a G(r) branching tree, r > 1/2, in closed form.

    With m = 1/r - 1 and s0 = r/(1-r) the value is (1-s0) m^n / (m^n - s0).
    Note the convention: the printed formula equals the probability that the
    height reaches n, i.e. P(Height > n-1); the DP oracle height_tail_dp pins
    this indexing.
    """
    if not 0.5 < r < 1.0:
        raise DomainError(f"harris_height_tail: r={r} outside (1/2, 1)")
    if n < 0:
        raise DomainError(f"harris_height_tail: n={n} < 0")
    m = 1.0 / r - 1.0
    s0 = r / (1.0 - r)
    mn = m**n
    return (1.0 - s0) * mn / (mn - s0)


def height_tail_dp(r: float, n: int) -> float:
    """P(Height >= n) by generating-function iteration, the indexing oracle.

    q_k = P(Height <= k) satisfies q_0 = r and q_{k+1} = r / (1 - (1-r) q_k).
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"height_tail_dp: r={r} outside (0, 1)")
    if n < 0:
        raise DomainError(f"height_tail_dp: n={n} < 0")
    if n == 0:
        return 1.0
    q = r
    for _ in range(n - 1):
        q = r / (1.0 - (1.0 - r) * q)
    return 1.0 - q


# sandwich construction ------------------------------------------------------

ABSENT, ACTIVE, FROZEN = 0, 1, 2


@dataclass
class SandwichResult:
    """Joint realization of the lower/middle/upper forests on one arena.

    Nodes live in a single parent/height arena; per-forest membership is the
    state code (0 absent, 1 active, 2 frozen).  `signs` is the middle
    forest's realized +1/-1 sequence, `rvals` the freeze probabilities used
    for it, and `event_E` records whether every r_k before the middle
    forest's extinction lay inside [p, q].
    """

    roots: int
    p: float
    q: float
    parent: np.ndarray
    height: np.ndarray
    lower_state: np.ndarray
    middle_state: np.ndarray
    upper_state: np.ndarray
    signs: np.ndarray
    rvals: np.ndarray
    event_E: bool
    inclusions_held: bool

    def _present(self, state: np.ndarray) -> np.ndarray:
        return state != ABSENT

    def check_inclusions(self) -> bool:
        """Vertex-set and active-set inclusions lower <= middle <= upper."""
        lp, mp, up = (self._present(s) for s in
                      (self.lower_state, self.middle_state, self.upper_state))
        la, ma, ua = (s == ACTIVE for s in
                      (self.lower_state, self.middle_state, self.upper_state))
        return bool(np.all(~lp | mp) and np.all(~mp | up)
                    and np.all(~la | ma) and np.all(~ma | ua))

    def offspring_counts(self, which: str) -> np.ndarray:
        """Child counts per present node of one forest ('lower'|'middle'|'upper')."""
        state = {"lower": self.lower_state, "middle": self.middle_state,
                 "upper": self.upper_state}[which]
        present = state != ABSENT
        counts = np.zeros(len(self.parent), dtype=np.int64)
        for v in range(self.roots, len(self.parent)):
            if present[v]:
                counts[self.parent[v]] += 1
        return counts[present]

    def tree_heights(self, which: str) -> np.ndarray:
        """Max height per root component of one forest."""
        state = {"lower": self.lower_state, "middle": self.middle_state,
                 "upper": self.upper_state}[which]
        root_of = np.arange(len(self.parent))
        for v in range(self.roots, len(self.parent)):
            root_of[v] = root_of[self.parent[v]]
        best = np.zeros(self.roots, dtype=np.int64)
        for v in range(len(self.parent)):
            if state[v] != ABSENT:
                r = root_of[v]
                if self.height[v] > best[r]:
                    best[r] = self.height[v]
        return best


def sandwich_coupling(roots: int, p: float, q: float, r_provider,
                      rng: np.random.Generator,
                      max_steps: int = 10**6,
                      stop_after_signs: int | None = None) -> SandwichResult:
    """Grow the coupled (lower, middle, upper) forests from shared uniforms.

    r_provider(k, signs) must return the middle forest's freeze probability
    for its k-th step (k >= 1) given the tuple of its earlier signs.  The
    upper forest freezes when U < p, the lower when U < q, and attachments
    reuse the same chosen vertex, so on the event that every r_k lies in
    [p, q] the three forests are nested with nested active sets.

    stop_after_signs truncates the run once the middle sequence has that
    many entries (useful for path-law tests); event_E then reflects only the
    realized prefix.
    """
    if not 0.5 < p <= q < 1.0:
        raise DomainError(f"sandwich_coupling: need 1/2 < p <= q < 1, got p={p}, q={q}")
    if roots < 1:
        raise DomainError(f"sandwich_coupling: roots={roots} < 1")

    parent = [-1] * roots
    height = [0] * roots
    low = [ACTIVE] * roots
    mid = [ACTIVE] * roots
    up = [ACTIVE] * roots
    upper_active = list(range(roots))
    middle_active = list(range(roots))
    signs: list[int] = []
    rvals: list[float] = []
    middle_alive_at: list[bool] = []   # middle had an active vertex before this sign
    C = True
    inclusions_held = True

    def new_node(par: int) -> int:
        parent.append(par)
        height.append(height[par] + 1)
        low.append(ABSENT)
        mid.append(ABSENT)
        up.append(ABSENT)
        return len(parent) - 1

    for _ in range(max_steps):
        need_more = (stop_after_signs is not None
                     and len(signs) < stop_after_signs)
        if stop_after_signs is not None and not need_more:
            break
        if not upper_active and not middle_active and not need_more:
            break
        u = rng.random()
        r = float(r_provider(len(signs) + 1, tuple(signs)))
        in_band = p <= r <= q
        if C and in_band:
            if upper_active:
                pos = int(rng.integers(len(upper_active)))
                v = upper_active[pos]
                child = -1
                if u < p:
                    up[v] = FROZEN
                    upper_active[pos] = upper_active[-1]
                    upper_active.pop()
                else:
                    child = new_node(v)
                    up[child] = ACTIVE
                    upper_active.append(child)
                if low[v] == ACTIVE:
                    if u < q:
                        low[v] = FROZEN
                    else:
                        low[child] = ACTIVE
                if mid[v] == ACTIVE:
                    middle_alive_at.append(True)
                    rvals.append(r)
                    if u < r:
                        signs.append(-1)
                        mid[v] = FROZEN
                        middle_active.remove(v)
                    else:
                        signs.append(1)
                        mid[child] = ACTIVE
                        middle_active.append(child)
            else:
                # all three forests are exhausted; the sign stream continues
                middle_alive_at.append(False)
                rvals.append(r)
                signs.append(1 if u >= r else -1)
        else:
            C = False
            if upper_active:
                pos = int(rng.integers(len(upper_active)))
                v = upper_active[pos]
                child = -1
                if u < p:
                    up[v] = FROZEN
                    upper_active[pos] = upper_active[-1]
                    upper_active.pop()
                else:
                    child = new_node(v)
                    up[child] = ACTIVE
                    upper_active.append(child)
                if low[v] == ACTIVE:
                    if u < q:
                        low[v] = FROZEN
                    else:
                        low[child] = ACTIVE
            rvals.append(r)
            if middle_active:
                middle_alive_at.append(True)
                wpos = int(rng.integers(len(middle_active)))
                w = middle_active[wpos]
                if u < r:
                    signs.append(-1)
                    mid[w] = FROZEN
                    middle_active[wpos] = middle_active[-1]
                    middle_active.pop()
                else:
                    signs.append(1)
                    child = new_node(w)
                    mid[child] = ACTIVE
                    middle_active.append(child)
            else:
                middle_alive_at.append(False)
                signs.append(1 if u >= r else -1)
    signs_a = np.array(signs, dtype=np.int8)
    rvals_a = np.array(rvals, dtype=float)
    # event E: every r_k with k < middle extinction time lies in [p, q];
    # extinction is the first sign index after which the middle walk hits 0
    walk = roots + np.cumsum(signs_a, dtype=np.int64)
    hit = np.nonzero(walk == 0)[0]
    last = int(hit[0]) if len(hit) else len(signs_a)   # tau - 1 as 0-based count
    event_E = bool(np.all((rvals_a[:last] >= p) & (rvals_a[:last] <= q)))

    result = SandwichResult(
        roots=roots, p=p, q=q,
        parent=np.array(parent, dtype=np.int64),
        height=np.array(height, dtype=np.int64),
        lower_state=np.array(low, dtype=np.int8),
        middle_state=np.array(mid, dtype=np.int8),
        upper_state=np.array(up, dtype=np.int8),
        signs=signs_a, rvals=rvals_a,
        event_E=event_E, inclusions_held=inclusions_held)
    result.inclusions_held = result.check_inclusions() if event_E else True
    return result
