"""Monte Carlo experiment orchestration, seeding, aggregation, persistence.

Replica i of an experiment owns the RNG stream PCG64(mix(seed, i)) where mix
is a SplitMix64 finalizer round; results are therefore deterministic for a
given (config, seed) no matter how many worker threads execute the fan-out.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .couplings import sandwich_coupling
from .freezetree import (build_arrays_from_signs, dangling_heights,
                         laplace_along_path)
from .polya import proportion_run
from .theory import ILL_CONDITIONED_LAMBDA, constants_for, f_lambda
from .walks import compute_J, fluid_deviation, simulate_sir, DIED_OUT

__all__ = [
    "ConfigError",
    "CapacityError",
    "ExperimentConfig",
    "splitmix64",
    "replica_rng",
    "aggregate",
    "persist",
    "run_survival",
    "run_fluid",
    "run_height",
    "run_profile",
    "run_dangling",
    "run_martingale_check",
    "run_urn",
    "run_coupling_demo",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class CapacityError(RuntimeError):
    """Run would exceed a hard memory or node budget."""


# SplitMix64 finalizer constants (Steele, Lea & Flood mix function)
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_M1 = 0xBF58476D1CE4E5B9
_SM_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 mixing round of a 64-bit value."""
    x = (x + _SM_GAMMA) & _MASK
    x = ((x ^ (x >> 30)) * _SM_M1) & _MASK
    x = ((x ^ (x >> 27)) * _SM_M2) & _MASK
    return x ^ (x >> 31)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for one replica, a pure function of (seed, replica)."""
    mixed = splitmix64((seed & _MASK) ^ splitmix64(replica))
    return np.random.Generator(np.random.PCG64(mixed))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    lam: float
    n: int = 10**5
    replicas: int = 100
    t: float | None = None
    delta: float = 0.05
    x_grid: tuple = (0.2, 0.4, 0.6)
    z: float = 0.3
    seed: int = 0
    threads: int = 1
    preset: str = "polya"
    allow_ill_conditioned: bool = False

    _KINDS = ("survival", "fluid", "height", "profile", "dangling",
              "martingale", "urn", "coupling")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind != "coupling":
            if self.lam <= 1.0:
                raise ConfigError(f"lambda={self.lam} must exceed 1")
            if self.lam <= ILL_CONDITIONED_LAMBDA and not self.allow_ill_conditioned:
                raise ConfigError(
                    f"lambda={self.lam} <= {ILL_CONDITIONED_LAMBDA} is numerically "
                    "ill-conditioned; pass allow_ill_conditioned to override")
        if self.n < 1:
            raise ConfigError(f"n={self.n} must be >= 1")
        if self.replicas < 1:
            raise ConfigError(f"replicas={self.replicas} must be >= 1")
        if self.threads < 1:
            raise ConfigError(f"threads={self.threads} must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta={self.delta} outside (0, 1)")
        if self.kind in ("profile", "dangling"):
            consts = constants_for(self.lam)
            if self.t is not None and not 0.0 < self.t < consts.t_lambda:
                raise ConfigError(f"t={self.t} outside (0, t_lambda={consts.t_lambda:.4f})")
            if self.kind == "profile":
                for x in self.x_grid:
                    if not 0.0 < x < consts.z_lambda:
                        raise ConfigError(f"x={x} outside (0, z_lambda={consts.z_lambda:.4f})")
        if self.n > 5 * 10**7:
            raise CapacityError(f"n={self.n} exceeds the node budget")

    def resolved_t(self) -> float:
        if self.t is not None:
            return self.t
        if self.kind == "survival":
            return 0.5 * constants_for(self.lam).t_lambda
        if self.kind == "fluid":
            return 1.2
        return 1.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["x_grid"] = list(self.x_grid)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _fan_out(config: ExperimentConfig, worker):
    """Run worker(replica, rng) for each replica, in replica order."""
    indices = range(config.replicas)
    if config.threads == 1:
        return [worker(i, replica_rng(config.seed, i)) for i in indices]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(worker, i, replica_rng(config.seed, i))
                   for i in indices]
        return [f.result() for f in futures]


# -- aggregation and persistence ---------------------------------------------


def aggregate(records: list[dict]) -> dict:
    """Order-independent numeric summary keyed by field name.

    Records are canonicalized by replica id before reduction, so any arrival
    order (thread interleaving included) yields the same summary.
    """
    records = sorted(records, key=lambda r: r.get("replica", 0))
    summary: dict = {"count": len(records)}
    if not records:
        return summary
    fields = [k for k in records[0]
              if isinstance(records[0][k], (int, float, bool, np.integer, np.floating))
              and k != "replica"]
    for name in fields:
        vals = np.array([float(r[name]) for r in records
                         if isinstance(r.get(name), (int, float, bool, np.integer, np.floating))])
        if len(vals) == 0:
            continue
        mean = float(vals.mean())
        m2 = float(((vals - mean) ** 2).sum())
        summary[name] = {
            "count": len(vals),
            "mean": mean,
            "var": m2 / (len(vals) - 1) if len(vals) > 1 else 0.0,
            "median": float(np.median(vals)),
            "min": float(vals.min()),
            "max": float(vals.max()),
        }
    return summary


def _format_cell(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def persist(records: list[dict], config: ExperimentConfig, out_dir: str,
            fmt: str = "csv", name: str = "results") -> dict:
    """Write records plus a sidecar JSON with the config hash and version.

    CSV uses a header row, minimal RFC-4180 quoting and LF line endings;
    NDJSON writes one record per line with keys in sorted order.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    try:
        if fmt == "csv":
            path = os.path.join(out_dir, f"{name}.csv")
            header = list(records[0].keys()) if records else ["replica"]
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            for r in records:
                writer.writerow([_format_cell(r.get(k)) for k in header])
            with open(path, "w", newline="") as fh:
                fh.write(buf.getvalue())
        elif fmt == "ndjson":
            path = os.path.join(out_dir, f"{name}.ndjson")
            with open(path, "w") as fh:
                for r in records:
                    clean = {k: (bool(v) if isinstance(v, np.bool_) else
                                 int(v) if isinstance(v, np.integer) else
                                 float(v) if isinstance(v, np.floating) else v)
                             for k, v in r.items()}
                    fh.write(json.dumps(clean, sort_keys=True) + "\n")
        else:
            raise ConfigError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"persist failed for {out_dir}: {exc}") from exc
    paths["data"] = path
    sidecar = os.path.join(out_dir, f"{name}.config.json")
    with open(sidecar, "w") as fh:
        json.dump({"config": config.as_dict(),
                   "config_hash": config.config_hash(),
                   "version": __version__}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["sidecar"] = sidecar
    return paths


# -- experiment runners -------------------------------------------------------


def run_survival(config: ExperimentConfig):
    """Survival frequency against the Bernoulli parameter 1 - 1/lambda."""
    consts = constants_for(config.lam)
    t = config.resolved_t()
    lambda_n = config.lam / config.n
    thresholds = {"t": t, "t_low": 0.5 * t, "t_high": 1.5 * t}

    def worker(i, rng):
        trace = simulate_sir(config.n, lambda_n, rng=rng)
        rec = {"replica": i, "tau": trace.tau}
        for label, tt in thresholds.items():
            rec["survived" if label == "t" else f"survived_{label}"] = (
                trace.tau >= math.floor(config.n * tt))
        return rec

    records = _fan_out(config, worker)
    summary = aggregate(records)
    summary["expected_rate"] = 1.0 - 1.0 / config.lam
    summary["threshold_t"] = t
    summary["t_lambda"] = consts.t_lambda
    return records, summary


def run_fluid(config: ExperimentConfig):
    """Sup-deviation of the scaled infection walk from its fluid limit."""
    t = config.resolved_t()
    lambda_n = config.lam / config.n

    def worker(i, rng):
        trace = simulate_sir(config.n, lambda_n, rng=rng)
        dev = fluid_deviation(trace, config.lam, t)
        if dev is DIED_OUT:
            return {"replica": i, "survived": False, "tau": trace.tau,
                    "deviation": None}
        return {"replica": i, "survived": True, "tau": trace.tau,
                "deviation": dev}

    records = _fan_out(config, worker)
    devs = np.array([r["deviation"] for r in records if r["deviation"] is not None])
    summary = aggregate(records)
    summary["surviving"] = int(len(devs))
    if len(devs):
        summary["deviation_le_002_frac"] = float(np.mean(devs <= 0.02))
        summary["max_deviation"] = float(devs.max())
    return records, summary


def run_height(config: ExperimentConfig):
    """Tree height per replica, conditioned on survival, against kappa."""
    consts = constants_for(config.lam)
    lambda_n = config.lam / config.n
    survive_k = math.floor(0.5 * consts.t_lambda * config.n)
    logn = math.log(config.n)

    def worker(i, rng):
        trace = simulate_sir(config.n, lambda_n, rng=rng)
        _, height, _, _ = build_arrays_from_signs(trace.steps, rng=rng)
        h = int(height.max())
        return {"replica": i, "survived": trace.tau >= survive_k,
                "tau": trace.tau, "height": h,
                "height_over_logn": h / logn}

    records = _fan_out(config, worker)
    summary = aggregate(records)
    cond = np.array([r["height_over_logn"] for r in records if r["survived"]])
    died = np.array([r["height_over_logn"] for r in records if not r["survived"]])
    summary["kappa"] = consts.kappa
    summary["survival_rate"] = float(np.mean([r["survived"] for r in records]))
    if len(cond):
        summary["conditional_median"] = float(np.median(cond))
        summary["conditional_iqr"] = float(np.percentile(cond, 75)
                                           - np.percentile(cond, 25))
    if len(died):
        summary["died_out_le_1_frac"] = float(np.mean(died <= 1.0))
    return records, summary


def run_profile(config: ExperimentConfig):
    """Active-profile band exponents log A / log n against f_lambda(x)."""
    consts = constants_for(config.lam)
    t = config.resolved_t()
    lambda_n = config.lam / config.n
    k_snap = math.floor(config.n * t)
    logn = math.log(config.n)
    gamma = consts.gamma

    def worker(i, rng):
        rec = {"replica": i, "survived": False,
               "active_total": None, "walk_value": None}
        for x in config.x_grid:
            rec[f"band_count_x{x}"] = None
            rec[f"exponent_x{x}"] = None
        trace = simulate_sir(config.n, lambda_n, rng=rng)
        if trace.tau <= k_snap:
            return rec
        _, height, state, _ = build_arrays_from_signs(trace.steps[:k_snap], rng=rng)
        active_h = height[state == 1]
        rec.update(survived=True, active_total=int(len(active_h)),
                   walk_value=int(trace.walk[k_snap]))
        for x in config.x_grid:
            a = math.ceil(gamma * math.exp(x) * logn)
            count = int(np.sum(active_h >= a))
            rec[f"band_count_x{x}"] = count
            rec[f"exponent_x{x}"] = math.log(count) / logn if count > 0 else 0.0
        return rec

    records = _fan_out(config, worker)
    summary = aggregate(records)
    alive = [r for r in records if r["survived"]]
    summary["surviving"] = len(alive)
    for x in config.x_grid:
        summary[f"f_lambda_x{x}"] = f_lambda(config.lam, x)
        if alive:
            vals = np.array([r[f"exponent_x{x}"] for r in alive])
            summary[f"mean_exponent_x{x}"] = float(vals.mean())
    return records, summary


def run_dangling(config: ExperimentConfig):
    """Snapshot-plus-outgrowth height decomposition near extinction.

    Snapshot at floor((1 - delta) t_lambda n); for every vertex born by then
    the post-snapshot outgrowth height is measured, and the height
    decomposition max over anchors of (anchor height + outgrowth) is
    summarized through its argmax location on the gamma e^x log n scale.
    """
    consts = constants_for(config.lam)
    lambda_n = config.lam / config.n
    k_snap = math.floor((1.0 - config.delta) * consts.t_lambda * config.n)
    logn = math.log(config.n)
    gamma = consts.gamma

    empty = {"survived": False, "tau": None, "snapshot_height": None,
             "total_height": None, "argmax_anchor_height": None,
             "argmax_dangling": None, "x_hat": None,
             "snapshot_dominates": None, "interior_argmax": None}

    def worker(i, rng):
        trace = simulate_sir(config.n, lambda_n, rng=rng)
        if trace.tau <= k_snap:
            return {"replica": i, **empty}
        parent, height, state, birth = build_arrays_from_signs(trace.steps, rng=rng)
        ids, anchor_h, dangle = dangling_heights(parent, height, state, birth, k_snap)
        totals = anchor_h + dangle
        j = int(np.argmax(totals))
        snap_h = int(anchor_h.max())
        total_h = int(totals.max())
        arg_h = int(anchor_h[j])
        # height-band coordinate of the argmax anchor: h = gamma e^x log n
        x_hat = math.log(max(arg_h, 1) / (gamma * logn)) if arg_h > 0 else 0.0
        return {"replica": i, "survived": True, "tau": trace.tau,
                "snapshot_height": snap_h, "total_height": total_h,
                "argmax_anchor_height": arg_h,
                "argmax_dangling": int(dangle[j]),
                "x_hat": x_hat,
                "snapshot_dominates": total_h <= 1.15 * snap_h,
                "interior_argmax": arg_h < 0.9 * snap_h}

    records = _fan_out(config, worker)
    summary = aggregate(records)
    alive = [r for r in records if r["survived"]]
    summary["surviving"] = len(alive)
    summary["z_lambda"] = consts.z_lambda
    summary["argmax_prediction"] = min(-math.log(consts.m_lambda), consts.z_lambda)
    if alive:
        summary["snapshot_dominates_frac"] = float(
            np.mean([r["snapshot_dominates"] for r in alive]))
        summary["interior_argmax_frac"] = float(
            np.mean([r["interior_argmax"] for r in alive]))
        summary["mean_x_hat"] = float(np.mean([r["x_hat"] for r in alive]))
    return records, summary


def run_martingale_check(config: ExperimentConfig):
    """Ensemble mean of the profile transform against its product form.

    One sign trace is fixed; tree replicas over it resample only the vertex
    choices.  At k in {J, 2J, floor(n t)} the ensemble mean of L(z, T_k)
    must match mean L(z, T_J) times the deterministic product C_k(z).
    """
    t = config.resolved_t()
    lambda_n = config.lam / config.n
    z = float(config.z)
    k_max = math.floor(config.n * t)
    trace = None
    for attempt in range(1000):
        cand = simulate_sir(config.n, lambda_n,
                            rng=replica_rng(config.seed, 2**32 + attempt))
        if cand.tau > k_max:
            trace = cand
            break
    if trace is None:
        raise CapacityError("no surviving trace found for the martingale check")
    J = compute_J(trace.walk, config.lam, k_max)
    ks = sorted({max(J, 0), min(2 * max(J, 1), k_max), k_max})
    ks_arr = np.array(ks, dtype=np.int64)

    def worker(i, rng):
        vals = laplace_along_path(trace.steps[:k_max], z, ks_arr, rng)
        rec = {"replica": i}
        for k, v in zip(ks, vals):
            rec[f"L_k{k}"] = float(v.real)
        return rec

    records = _fan_out(config, worker)
    ez1 = math.exp(z) - 1.0
    plus = trace.steps[: k_max] == 1
    S = trace.walk[1 : k_max + 1].astype(float)
    log_factors = np.where(plus, np.log1p(ez1 / S), 0.0)
    csum = np.concatenate([[0.0], np.cumsum(log_factors)])  # over steps 1..k

    summary: dict = {"J": J, "ks": ks, "z": z, "count": len(records)}
    base = np.array([r[f"L_k{ks[0]}"] for r in records])
    summary["mean_L_J"] = float(base.mean())
    for k in ks[1:]:
        vals = np.array([r[f"L_k{k}"] for r in records])
        C = math.exp(csum[k] - csum[ks[0]])
        predicted = base.mean() * C
        se = math.sqrt(vals.var(ddof=1) / len(vals) +
                       C**2 * base.var(ddof=1) / len(base))
        summary[f"mean_L_k{k}"] = float(vals.mean())
        summary[f"predicted_k{k}"] = float(predicted)
        summary[f"se_k{k}"] = float(se)
        summary[f"within_3se_k{k}"] = bool(abs(vals.mean() - predicted) <= 3.0 * se)
    return records, summary


def _urn_replacement(config: ExperimentConfig, rng: np.random.Generator):
    k = config.n
    if config.preset == "polya":
        return 1, 1, np.ones(k, dtype=np.int64)
    if config.preset == "alternating":
        xs = np.ones(k, dtype=np.int64)
        xs[1::2] = -1
        return 1, 1, xs
    if config.preset == "from-tree":
        lam = config.lam
        trace = simulate_sir(max(k, 100), lam / max(k, 100), rng=rng)
        walk = trace.walk
        hits = np.nonzero(walk == 2)[0]
        if len(hits) == 0:
            return 1, 1, np.zeros(0, dtype=np.int64)
        start = int(hits[0])
        xs = trace.steps[start:].astype(np.int64)
        totals = 2 + np.cumsum(xs)
        dead = np.nonzero(totals < 1)[0]
        if len(dead):
            xs = xs[: dead[0]]
        return 1, 1, xs[:k]
    raise ConfigError(f"unknown urn preset {config.preset!r}")


def run_urn(config: ExperimentConfig):
    """Urn trajectories for a preset replacement sequence."""

    def worker(i, rng):
        r0, b0, xs = _urn_replacement(config, rng)
        traj = proportion_run(r0, b0, xs, rng)
        k = len(xs)
        return {"replica": i, "k": k,
                "R": int(traj.R[-1]), "s": int(traj.s[-1]),
                "proportion": float(traj.R[-1] / traj.s[-1]),
                "draw_average": float(traj.red_draw_average()[-1]) if k else float(r0 / (r0 + b0))}

    records = _fan_out(config, worker)
    summary = aggregate(records)
    summary["preset"] = config.preset
    return records, summary


def run_coupling_demo(config: ExperimentConfig, roots: int = 5,
                      p: float = 0.6, q: float = 0.8, r_const: float = 0.7):
    """Sandwich-coupling structural checks with a constant middle rate."""
    if not 0.5 < p <= r_const <= q < 1.0:
        raise ConfigError("coupling demo requires 1/2 < p <= r <= q < 1")

    def worker(i, rng):
        res = sandwich_coupling(roots, p, q, lambda k, xs: r_const, rng)
        return {"replica": i, "event_E": res.event_E,
                "inclusions": res.inclusions_held,
                "nodes": int(len(res.parent)),
                "upper_height": int(res.tree_heights("upper").max()),
                "lower_height": int(res.tree_heights("lower").max())}

    records = _fan_out(config, worker)
    summary = aggregate(records)
    summary["all_event_E"] = all(r["event_E"] for r in records)
    summary["all_inclusions"] = all(r["inclusions"] for r in records)
    summary["p"], summary["q"], summary["r"] = p, q, r_const
    return records, summary
