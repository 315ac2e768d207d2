"""Renderers: one function per figure kind, all pure file-to-file."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .jobs import FigureError, FigureJob, numeric  # noqa: E402

# pinned style so re-rendering the same inputs yields identical bytes
plt.rcParams["svg.hashsalt"] = "figrender"
plt.rcParams["figure.dpi"] = 100

_ORANGE = "#e66100"
_BLUE = "#1f77b4"
_GREY = "#888888"


def _save(fig, job: FigureJob):
    metadata = {"Date": None} if job.output_path.endswith(".svg") else None
    fig.savefig(job.output_path, metadata=metadata,
                dpi=job.style.get("dpi", 150))
    plt.close(fig)


def render_kappa_curve(job: FigureJob) -> str:
    """Height-constant curve: both branches, with the crossing rate marked."""
    rows = job.rows()
    if not rows:
        raise FigureError(f"{job.input_path}: empty table")
    job.require_columns(rows, ("lambda", "kappa_sub_branch",
                               "kappa_sup_branch", "kappa"))
    lam = numeric(rows, "lambda")
    sub = numeric(rows, "kappa_sub_branch")
    sup = numeric(rows, "kappa_sup_branch")
    kap = numeric(rows, "kappa")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(lam) == 1:
        ax.plot(lam, kap, "o", color=_ORANGE)
    else:
        ax.plot(lam, sub, color=_BLUE, lw=1.0, ls="--",
                label="low-rate branch")
        ax.plot(lam, sup, color=_GREY, lw=1.0, ls=":",
                label="high-rate branch")
        ax.plot(lam, kap, color=_ORANGE, lw=2.0, label="height constant")
        lambda_c = job.sidecar().get("lambda_c")
        if lambda_c is not None:
            ax.axvline(lambda_c, color="black", lw=0.8, alpha=0.6)
            ax.annotate(f"crossing at {lambda_c:.4f}",
                        xy=(lambda_c, min(kap)),
                        xytext=(4, 4), textcoords="offset points",
                        fontsize=8)
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("infection rate multiplier")
    ax.set_ylabel("height / log n limit")
    fig.tight_layout()
    _save(fig, job)
    return job.output_path


def _radial_layout(parent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles and integer depths for a parent-array tree (parent[root] = -1).

    Leaves receive consecutive angles in depth-first order; every internal
    vertex sits at the mean angle of its children.
    """
    n = len(parent)
    children: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for v in range(n):
        if parent[v] < 0:
            roots.append(v)
        else:
            children[parent[v]].append(v)

    depth = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if parent[v] >= 0:
            depth[v] = depth[parent[v]] + 1

    theta = np.zeros(n)
    order = []  # post-order via two-stack DFS
    stack = list(reversed(roots))
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(children[v]))
    next_leaf = 0
    leaf_count = sum(1 for v in range(n) if not children[v])
    for v in reversed(order):
        if not children[v]:
            theta[v] = 2.0 * math.pi * next_leaf / max(leaf_count, 1)
            next_leaf += 1
        else:
            theta[v] = float(np.mean(theta[children[v]]))
    return theta, depth


def render_tree(job: FigureJob) -> str:
    """Radial tree drawing: early/late birth coloring, deepest path in bold."""
    rows = job.rows()
    if not rows:
        raise FigureError(f"{job.input_path}: empty table")
    job.require_columns(rows, ("node", "parent", "height", "birth_step",
                               "state"))
    try:
        node = np.array([int(r["node"]) for r in rows])
        parent = np.array([int(r["parent"]) for r in rows])
        height = np.array([int(r["height"]) for r in rows])
        birth = np.array([int(r["birth_step"]) for r in rows])
    except ValueError as exc:
        raise FigureError(f"{job.input_path}: non-integer tree cell: {exc}")
    if not np.array_equal(node, np.arange(len(node))):
        raise FigureError(f"{job.input_path}: node ids must be 0..n-1 in order")
    if np.any(parent >= node):
        raise FigureError(f"{job.input_path}: a parent id is not older than "
                          "its child")

    theta, depth = _radial_layout(parent)
    if not np.array_equal(depth, height):
        raise FigureError(f"{job.input_path}: height column disagrees with "
                          "the parent structure")
    x = depth * np.cos(theta)
    y = depth * np.sin(theta)

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    has_parent = parent >= 0
    if np.any(has_parent):
        child_ids = node[has_parent]
        segs = np.stack([
            np.stack([x[parent[child_ids]], y[parent[child_ids]]], axis=1),
            np.stack([x[child_ids], y[child_ids]], axis=1),
        ], axis=1)
        ax.add_collection(LineCollection(segs, colors=_GREY, linewidths=0.3,
                                         alpha=0.6, zorder=1))

    early = birth <= np.median(birth)   # first half in order of appearance
    size = max(0.2, 400.0 / max(len(node), 1))
    ax.scatter(x[early], y[early], s=size, c=_ORANGE, zorder=2, linewidths=0)
    ax.scatter(x[~early], y[~early], s=size, c=_BLUE, zorder=2, linewidths=0)

    # bold root-to-deepest path
    tip = int(np.argmax(depth))
    path = [tip]
    while parent[path[-1]] >= 0:
        path.append(int(parent[path[-1]]))
    if len(path) > 1:
        ax.plot(x[path], y[path], color="black", lw=1.8, zorder=3)
    ax.scatter([x[tip]], [y[tip]], s=12.0, c="black", zorder=4)

    ax.set_aspect("equal")
    ax.axis("off")
    fig.tight_layout()
    _save(fig, job)
    return job.output_path


def _survivor_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r.get("survived", "").lower() == "true"]


def render_profile(job: FigureJob) -> str:
    """Box plot of per-replica band exponents, one box per band location."""
    rows = job.rows()
    if not rows:
        raise FigureError(f"{job.input_path}: empty table")
    exp_cols = sorted(c for c in rows[0] if c.startswith("exponent_x"))
    if not exp_cols:
        raise FigureError(f"{job.input_path}: no exponent_x* columns")
    alive = _survivor_rows(rows)
    if not alive:
        raise FigureError(f"{job.input_path}: no surviving replicas to plot")
    data = [numeric(alive, c) for c in exp_cols]
    labels = [c.removeprefix("exponent_x") for c in exp_cols]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.boxplot(data, tick_labels=labels)
    ax.set_xlabel("band location x")
    ax.set_ylabel("log band count / log n")
    fig.tight_layout()
    _save(fig, job)
    return job.output_path


def render_fluid(job: FigureJob) -> str:
    """Histogram of sup-deviations from the fluid curve over survivors."""
    rows = job.rows()
    if not rows:
        raise FigureError(f"{job.input_path}: empty table")
    job.require_columns(rows, ("survived", "deviation"))
    devs = numeric(_survivor_rows(rows), "deviation")
    if not devs:
        raise FigureError(f"{job.input_path}: no surviving replicas to plot")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(devs, bins=min(30, max(5, len(devs) // 4)), color=_ORANGE)
    ax.set_xlabel("sup deviation from the fluid curve")
    ax.set_ylabel("replicas")
    fig.tight_layout()
    _save(fig, job)
    return job.output_path


def render_height(job: FigureJob) -> str:
    """Histogram of height / log n, survivors and early deaths separated."""
    rows = job.rows()
    if not rows:
        raise FigureError(f"{job.input_path}: empty table")
    job.require_columns(rows, ("survived", "height_over_logn"))
    alive = numeric(_survivor_rows(rows), "height_over_logn")
    dead = numeric([r for r in rows if r["survived"].lower() != "true"],
                   "height_over_logn")
    if not alive and not dead:
        raise FigureError(f"{job.input_path}: no replicas to plot")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    bins = np.histogram_bin_edges(alive + dead, bins=30)
    if alive:
        ax.hist(alive, bins=bins, color=_ORANGE, alpha=0.8, label="survived")
    if dead:
        ax.hist(dead, bins=bins, color=_BLUE, alpha=0.6, label="died early")
    ax.set_xlabel("height / log n")
    ax.set_ylabel("replicas")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, job)
    return job.output_path


RENDERERS = {
    "kappa": render_kappa_curve,
    "tree": render_tree,
    "profile": render_profile,
    "fluid": render_fluid,
    "height": render_height,
}
