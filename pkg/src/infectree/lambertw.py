"""Principal-branch Lambert W on [-1/e, inf) with certified lower bounds.

The solver is a Halley iteration seeded with the square-root expansion near
the branch point x = -1/e, where Newton-type iterations from generic seeds
are unstable.  The lower-bound functions are closed forms that are provably
below W on their domains; they are used as verification oracles and by the
`verify-lambert` CLI subcommand.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "BRANCH_POINT",
    "lambert_w0",
    "lambert_w0_array",
    "lower_bound_branch",
    "lower_bound_lambda",
    "exp_decay_series_bounds",
    "radical_lower_bound",
]

BRANCH_POINT = -math.exp(-1.0)

_BRANCH_TOL = 1e-15
_MAX_ITER = 50


class DomainError(ValueError):
    """Argument outside the function's real domain."""


def _halley(x: float, w: float) -> float:
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) < 1e-15 * (1.0 + abs(w)):
            break
    return w


def _seed(x: float) -> float:
    if x < -0.2 * math.exp(-1.0):
        # square-root expansion at the branch point
        return -1.0 + math.sqrt(2.0) * math.sqrt(max(1.0 + math.e * x, 0.0))
    if x < math.e:
        return x / (1.0 + x) if x > -0.5 else x
    lx = math.log(x)
    return lx - math.log(lx)


def lambert_w0(x: float) -> float:
    """Principal branch W(x), solving w e^w = x for x >= -1/e.

    Exact at the branch point (-1/e -> -1) and at 0.  Raises DomainError
    for x < -1/e - 1e-15.
    """
    x = float(x)
    if x < BRANCH_POINT - _BRANCH_TOL:
        raise DomainError(f"lambert_w0: x={x} below -1/e")
    if x == 0.0:
        return 0.0
    if x - BRANCH_POINT <= _BRANCH_TOL:
        return -1.0
    return _halley(x, _seed(x))


def lambert_w0_array(x: np.ndarray) -> np.ndarray:
    """Vectorized principal branch, same contract as lambert_w0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < BRANCH_POINT - _BRANCH_TOL):
        raise DomainError("lambert_w0_array: argument below -1/e")
    xc = np.clip(x, BRANCH_POINT, None)
    w = np.where(
        xc < -0.2 * math.exp(-1.0),
        -1.0 + math.sqrt(2.0) * np.sqrt(np.maximum(1.0 + math.e * xc, 0.0)),
        np.where(
            xc < math.e,
            np.where(xc > -0.5, xc / (1.0 + xc), xc),
            np.log(np.maximum(xc, 1e-300)),
        ),
    )
    big = xc >= math.e
    if np.any(big):
        lx = np.log(xc[big])
        w[big] = lx - np.log(lx)
    for _ in range(_MAX_ITER):
        ew = np.exp(w)
        f = w * ew - xc
        wp1 = w + 1.0
        # entries pinned at the branch point have wp1 = 0; their updates are
        # discarded below, so the division is silenced and the step zeroed
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = f / denom
        step = np.where(np.isfinite(step), step, 0.0)
        w = w - step
        if np.all(np.abs(step) < 1e-15 * (1.0 + np.abs(w))):
            break
    w[np.abs(xc - BRANCH_POINT) <= _BRANCH_TOL] = -1.0
    w[xc == 0.0] = 0.0
    return w


def lower_bound_branch(x: float) -> float:
    """Closed-form lower bound for W(x) on [-1/e, 0].

    Equals the first three terms of the branch-point expansion of W and is
    guaranteed <= lambert_w0(x) on the whole interval.
    """
    x = float(x)
    if x < BRANCH_POINT - _BRANCH_TOL or x > 0.0:
        raise DomainError(f"lower_bound_branch: x={x} outside [-1/e, 0]")
    y = max(x + math.exp(-1.0), 0.0)
    return -1.0 + math.sqrt(2.0 * math.e) * math.sqrt(y) - (2.0 / 3.0) * math.e * y


def lower_bound_lambda(lam: float) -> float:
    """Closed-form lower bound for W(-lambda e^{-lambda}) valid for lambda >= 1."""
    lam = float(lam)
    if lam < 1.0:
        raise DomainError(f"lower_bound_lambda: lambda={lam} < 1")
    return (lam - 1.0) * math.sqrt(2.0 - 2.0 * lam + lam * lam) - 2.0 + 2.0 * lam - lam * lam


def exp_decay_series_bounds(h: float) -> tuple[float, float]:
    """Polynomial sandwich for e^{-h}(1+h), valid for h >= 0.

    Returns (lower, upper) with lower <= e^{-h}(1+h) <= upper; the bounds are
    truncations of the alternating series of e^{-h}(1+h).
    """
    if h < 0.0:
        raise DomainError(f"exp_decay_series_bounds: h={h} < 0")
    lo = 1.0 - h**2 / 2.0 + h**3 / 3.0 - h**4 / 8.0
    hi = lo + h**5 / 30.0 - h**6 / 144.0 + h**7 / 840.0
    return lo, hi


def radical_lower_bound(h: float) -> float:
    """Quartic lower bound for sqrt(2 - 2 e^{-h}(1+h)), valid on [0, 1]."""
    if h < 0.0 or h > 1.0:
        raise DomainError(f"radical_lower_bound: h={h} outside [0, 1]")
    return h - h**2 / 3.0 + (5.0 / 72.0) * h**3 - (11.0 / 1080.0) * h**4
