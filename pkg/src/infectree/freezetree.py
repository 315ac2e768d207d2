"""Uniform attachment with freezing: arena trees, profiles and martingale checks.

Growth consumes a sign sequence: +1 attaches a fresh active child to a
uniformly chosen active vertex, -1 freezes one.  Two active-set backends are
provided: a swap-remove vector (O(1) sample/delete, permutes order; the
default for all performance work) and a stable order-of-appearance list with
tombstones, which preserves the vertex enumeration that the shared-uniform
coupling rule requires.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lambertw import DomainError
from .theory import z_lambda
from .walks import InfectionTrace, compute_J

__all__ = [
    "FreezeTree",
    "Profile",
    "StepRecord",
    "build_from_signs",
    "build_arrays_from_signs",
    "one_step_expectation_check",
    "martingale_sequence",
    "fourier_invert",
    "dangling_heights",
]


class NoActiveVertexError(ValueError):
    """Raised when a normalized quantity needs at least one active vertex."""


@dataclass(frozen=True)
class StepRecord:
    step: int
    chosen: int | None   # arena index, None for a no-op step
    action: str          # "attach", "freeze" or "noop"


@dataclass
class Profile:
    """Height -> active-vertex count map with range sums."""

    counts: dict[int, int]

    def total(self) -> int:
        return sum(self.counts.values())

    def range_sum(self, a: float, b: float = math.inf) -> int:
        return sum(c for h, c in self.counts.items() if a <= h <= b)


class FreezeTree:
    """Arena-indexed rooted forest with per-node height and active/frozen state."""

    def __init__(self, roots: int = 1, backend: str = "swap"):
        if roots < 1:
            raise ValueError("roots must be >= 1")
        if backend not in ("swap", "stable"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.root_count = roots
        self.parent: list[int] = [-1] * roots
        self.height: list[int] = [0] * roots
        self.active: list[bool] = [True] * roots
        self.birth_step: list[int] = [0] * roots
        self.step_count = 0
        # swap backend: unordered vector of active ids
        # stable backend: appearance-ordered list with tombstones (-1)
        self._active_list: list[int] = list(range(roots))
        self._n_active = roots

    # -- active-set bookkeeping -------------------------------------------

    @property
    def n_active(self) -> int:
        return self._n_active

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def active_ids(self) -> list[int]:
        if self.backend == "swap":
            return list(self._active_list)
        return [v for v in self._active_list if v >= 0]

    def _pick(self, u: float) -> tuple[int, int]:
        """Map a uniform in [0,1) to (position, arena id) among actives."""
        k = min(int(u * self._n_active), self._n_active - 1)
        if self.backend == "swap":
            return k, self._active_list[k]
        live = -1
        for pos, v in enumerate(self._active_list):
            if v >= 0:
                live += 1
                if live == k:
                    return pos, v
        raise AssertionError("active count out of sync")

    def _remove_at(self, pos: int) -> None:
        if self.backend == "swap":
            self._active_list[pos] = self._active_list[-1]
            self._active_list.pop()
        else:
            self._active_list[pos] = -1
            if len(self._active_list) > 2 * self._n_active + 8:
                self._active_list = [v for v in self._active_list if v >= 0]
        self._n_active -= 1

    # -- growth -------------------------------------------------------------

    def grow_step(self, sign: int, u: float) -> StepRecord:
        """Apply one +1/-1 step; no-op when no active vertex remains."""
        self.step_count += 1
        if self._n_active == 0:
            return StepRecord(self.step_count, None, "noop")
        pos, v = self._pick(u)
        if sign == 1:
            child = len(self.parent)
            self.parent.append(v)
            self.height.append(self.height[v] + 1)
            self.active.append(True)
            self.birth_step.append(self.step_count)
            self._active_list.append(child)
            self._n_active += 1
            return StepRecord(self.step_count, v, "attach")
        self.active[v] = False
        self._remove_at(pos)
        return StepRecord(self.step_count, v, "freeze")

    # -- observables ----------------------------------------------------------

    def tree_height(self) -> int:
        return max(self.height)

    def active_profile(self) -> Profile:
        counts: dict[int, int] = {}
        for v in self.active_ids():
            h = self.height[v]
            counts[h] = counts.get(h, 0) + 1
        return Profile(counts)

    def laplace_transform(self, z):
        """(1/#active) * sum over active vertices of e^{z height}."""
        if self._n_active == 0:
            raise NoActiveVertexError("laplace_transform needs an active vertex")
        if isinstance(z, complex):
            acc = sum(cmath.exp(z * self.height[v]) for v in self.active_ids())
        else:
            acc = sum(math.exp(z * self.height[v]) for v in self.active_ids())
        return acc / self._n_active

    def export_rows(self):
        """Rows for the node,parent,height,birth_step,state CSV export."""
        for v in range(self.n_nodes):
            yield (v, self.parent[v], self.height[v], self.birth_step[v],
                   "active" if self.active[v] else "frozen")


def build_from_signs(signs, roots: int = 1,
                     rng: np.random.Generator | None = None,
                     backend: str = "swap") -> FreezeTree:
    """Apply grow_step over a sign sequence, one uniform per step."""
    if rng is None:
        rng = np.random.default_rng()
    tree = FreezeTree(roots=roots, backend=backend)
    for sign in signs:
        tree.grow_step(int(sign), rng.random())
    return tree


@njit(cache=True, nogil=True)
def _build_kernel(signs, uniforms, roots):
    n_steps = len(signs)
    cap = roots + n_steps
    parent = np.full(cap, -1, dtype=np.int32)
    height = np.zeros(cap, dtype=np.int32)
    state = np.zeros(cap, dtype=np.uint8)   # 1 = active
    birth = np.zeros(cap, dtype=np.int32)
    active = np.empty(cap, dtype=np.int32)
    for r in range(roots):
        state[r] = 1
        active[r] = r
    n_nodes = roots
    n_active = roots
    for k in range(n_steps):
        if n_active == 0:
            continue
        pos = int(uniforms[k] * n_active)
        if pos >= n_active:
            pos = n_active - 1
        v = active[pos]
        if signs[k] == 1:
            parent[n_nodes] = v
            height[n_nodes] = height[v] + 1
            state[n_nodes] = 1
            birth[n_nodes] = k + 1
            active[n_active] = n_nodes
            n_active += 1
            n_nodes += 1
        else:
            state[v] = 0
            active[pos] = active[n_active - 1]
            n_active -= 1
    return parent[:n_nodes], height[:n_nodes], state[:n_nodes], birth[:n_nodes]


def build_arrays_from_signs(signs: np.ndarray, roots: int = 1,
                            rng: np.random.Generator | None = None):
    """Fast array-based growth (swap-remove backend), for large runs.

    Returns (parent, height, state, birth_step) arrays; state is 1 for
    active, 0 for frozen.  Distributionally identical to build_from_signs
    with the swap backend.
    """
    if rng is None:
        rng = np.random.default_rng()
    signs = np.ascontiguousarray(signs, dtype=np.int8)
    uniforms = rng.random(len(signs))
    return _build_kernel(signs, uniforms, roots)


def one_step_expectation_check(tree: FreezeTree, sign: int, z):
    """Exact one-step conditional-mean identity for the profile transform.

    lhs averages the transform over all equally likely outcomes of the step;
    rhs is L * (1 + (e^z - 1) 1{sign=1} / s_new).  Returns (lhs, rhs,
    residual).
    """
    s = tree.n_active
    if s == 0:
        raise NoActiveVertexError("one_step_expectation_check needs an active vertex")
    if sign == -1 and s == 1:
        raise NoActiveVertexError("freezing the last active vertex leaves L undefined")
    exp_ = cmath.exp if isinstance(z, complex) else math.exp
    L = tree.laplace_transform(z)
    heights = [tree.height[v] for v in tree.active_ids()]
    if sign == 1:
        outcomes = [(s * L + exp_(z * (h + 1))) / (s + 1) for h in heights]
        s_new = s + 1
        rhs = L * (1.0 + (exp_(z) - 1.0) / s_new)
    else:
        outcomes = [(s * L - exp_(z * h)) / (s - 1) for h in heights]
        rhs = L
    lhs = sum(outcomes) / s
    return lhs, rhs, abs(lhs - rhs)


@njit(cache=True, nogil=True)
def _laplace_path_kernel(signs, uniforms, z, ks):
    """Transform of the growing tree along a sign path, sampled at indices ks."""
    n_steps = len(signs)
    cap = 1 + n_steps
    height = np.zeros(cap, dtype=np.int32)
    active = np.empty(cap, dtype=np.int32)
    active[0] = 0
    n_nodes = 1
    n_active = 1
    total = np.complex128(1.0)  # sum over actives of e^{z h}; root height 0
    out = np.empty(len(ks), dtype=np.complex128)
    nxt = 0
    if nxt < len(ks) and ks[nxt] == 0:
        out[nxt] = total / n_active
        nxt += 1
    for k in range(n_steps):
        if n_active > 0:
            pos = int(uniforms[k] * n_active)
            if pos >= n_active:
                pos = n_active - 1
            v = active[pos]
            if signs[k] == 1:
                height[n_nodes] = height[v] + 1
                total += np.exp(z * height[n_nodes])
                active[n_active] = n_nodes
                n_active += 1
                n_nodes += 1
            else:
                total -= np.exp(z * height[v])
                active[pos] = active[n_active - 1]
                n_active -= 1
        if nxt < len(ks) and ks[nxt] == k + 1:
            if n_active > 0:
                out[nxt] = total / n_active
            else:
                out[nxt] = np.complex128(np.nan)
            nxt += 1
    return out


def laplace_along_path(signs: np.ndarray, z: complex, ks: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Profile transforms L(z, T_k) at the sorted step indices ks."""
    signs = np.ascontiguousarray(signs, dtype=np.int8)
    uniforms = rng.random(len(signs))
    return _laplace_path_kernel(signs, uniforms, np.complex128(z),
                                np.ascontiguousarray(ks, dtype=np.int64))


def martingale_sequence(trace: InfectionTrace, z, t: float,
                        rng: np.random.Generator | None = None):
    """Normalized-transform martingale M_k(z) for k in [J^n, floor(n t)].

    Returns (ks, M values, J).  The normalizer is the running product of
    (1 + (e^z - 1) 1{X_i = 1} / S_i) started after the cutoff J^n, below
    which factors may vanish.
    """
    if rng is None:
        rng = np.random.default_rng()
    lam = trace.lambda_n * trace.n
    z = complex(z)
    if z.real >= 2.0 * z_lambda(lam):
        raise DomainError(f"martingale_sequence: Re(z)={z.real} outside E'")
    k_max = int(math.floor(trace.n * t))
    if trace.tau <= k_max and trace.absorbed:
        raise DomainError("martingale_sequence requires survival up to floor(n t)")
    J = compute_J(trace.walk, lam, k_max)
    if J is None or J > k_max:
        raise DomainError("no valid index range: J exceeds floor(n t)")
    ks = np.arange(J, k_max + 1)
    L = laplace_along_path(trace.steps[:k_max], z, ks, rng)
    ez1 = cmath.exp(z) - 1.0
    factors = np.ones(len(ks), dtype=np.complex128)
    plus = trace.steps[J + 1 : k_max + 1] == 1
    S = trace.walk[J + 1 : k_max + 1].astype(float)
    factors[1:] = np.where(plus, 1.0 + ez1 / S, 1.0)
    C = np.cumprod(factors)
    return ks, L / C, J


def fourier_invert(tree: FreezeTree, h: float, k: int) -> float:
    """Recover the normalized profile at height k from the transform.

    Uses an M-point trapezoid (DFT) rule with M > max active height, which is
    exact because u -> L(h + iu) is a trigonometric polynomial of degree at
    most the max active height.
    """
    if tree.n_active == 0:
        raise NoActiveVertexError("fourier_invert needs an active vertex")
    heights = np.array([tree.height[v] for v in tree.active_ids()])
    M = int(heights.max()) + 2
    m = np.arange(M)
    u = 2.0 * np.pi * m / M
    # L(h+iu) for all quadrature nodes at once
    weights = np.exp(h * heights)
    Lvals = (weights[None, :] * np.exp(1j * np.outer(u, heights))).sum(axis=1) / len(heights)
    coeff = np.mean(Lvals * np.exp(-k * (h + 1j * u)))
    return float(coeff.real)


def dangling_heights(parent: np.ndarray, height: np.ndarray, state: np.ndarray,
                     birth: np.ndarray, snapshot_step: int):
    """Max height of each snapshot-active vertex's post-snapshot outgrowth.

    A node born after the snapshot is anchored to its most recent ancestor
    alive at the snapshot.  Returns (anchor ids, anchor heights, dangling
    heights) over vertices active at the snapshot, where the dangling height
    counts edges added after the snapshot.
    """
    return _dangling_kernel(parent, height, state, birth, snapshot_step)


@njit(cache=True, nogil=True)
def _dangling_kernel(parent, height, state, birth, snapshot_step):
    n = len(parent)
    anchor = np.empty(n, dtype=np.int64)
    rel = np.zeros(n, dtype=np.int64)
    best = np.zeros(n, dtype=np.int64)
    snap_active = np.zeros(n, dtype=np.uint8)
    # a vertex was active at the snapshot iff it was born by then and not yet
    # frozen; freezes are not timestamped in the arena, so reconstruct from
    # the fact that anchors accumulate growth only if they were active
    for v in range(n):
        if birth[v] <= snapshot_step:
            anchor[v] = v
        else:
            p = parent[v]
            anchor[v] = anchor[p]
            rel[v] = rel[p] + 1
            if rel[v] > best[anchor[v]]:
                best[anchor[v]] = rel[v]
            snap_active[anchor[v]] = 1
    count = 0
    for v in range(n):
        if birth[v] <= snapshot_step:
            count += 1
    ids = np.empty(count, dtype=np.int64)
    hts = np.empty(count, dtype=np.int64)
    dng = np.empty(count, dtype=np.int64)
    i = 0
    for v in range(n):
        if birth[v] <= snapshot_step:
            ids[i] = v
            hts[i] = height[v]
            dng[i] = best[v]
            i += 1
    return ids, hts, dng
