"""Multi-trial synthetic study and hyperparameter sweeps.

Every trial draws a fresh pool of sequences from the synthetic ground truth,
holds out the last ``test_size`` sequences, and fits each method on random
nested training subsets of the rest. Outputs are plain CSV and JSON:

``trials.csv``
    one row per (trial, C, method) with provenance and a status field
``summary.csv`` / ``summary.json``
    mean and standard deviation per (method, C); the JSON validates against
    ``schemas/summary.schema.json``
``curve_<metric>.csv``
    long-format ``metric, method, C, mean, std`` for plotting against C
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .basis import select_basis
from .core import excitation_stats, extract_graph
from .evaluation import evaluate, loglike_test, score_graph
from .learn import METHODS, LearnConfig, fit
from .model import ClusterStructure, Dataset
from .simulate import FAMILY_ALIASES, make_rng, make_synthetic

log = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).parent / "schemas" / "summary.schema.json"

TRIAL_COLUMNS = [
    "method", "C", "trial", "trial_seed", "config_hash", "alpha_s", "alpha_g", "alpha_p",
    "M", "omega0", "loglike", "e_mu", "e_phi", "edge_precision", "edge_recall", "edge_f1",
    "absent_precision", "absent_recall", "absent_f1", "absent_recovered",
    "outer_iterations", "converged", "fit_seconds", "status",
]
METRICS = ["loglike", "e_mu", "e_phi", "edge_f1", "absent_f1"]
SWEEP_COLUMNS = ["profile", "value", "alpha_s", "alpha_g", "alpha_p", "loglike",
                 "absent_f1", "config_hash", "status"]
PAPER_ALPHAS = {"alpha_s": 10.0, "alpha_g": 100.0, "alpha_p": 1000.0}
TRIAL_SEED_STRIDE = 100_003


@dataclass(frozen=True)
class ExperimentPlan:
    family: str = "sine_like"
    training_sizes: tuple = (50, 100, 150, 200, 250)
    num_trials: int = 10
    test_size: int = 250
    methods: tuple = ("MLE", "MLE-SGLP")
    alpha_s: float = 10.0
    alpha_g: float = 100.0
    alpha_p: float = 1000.0
    clusters: tuple = ((0, 1, 2), (3, 4))
    num_types: int = 5
    horizon: float = 50.0
    rho: float = 0.01
    seed: int = 0
    inner_max: int = 100
    outer_max: int = 50

    def __post_init__(self):
        object.__setattr__(self, "family", FAMILY_ALIASES.get(self.family, self.family))
        object.__setattr__(self, "training_sizes", tuple(int(c) for c in self.training_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "clusters", tuple(tuple(int(u) for u in c)
                                                   for c in self.clusters))
        if not self.training_sizes or min(self.training_sizes) < 1:
            raise ValueError("training sizes must be positive")
        if self.num_trials < 1 or self.test_size < 1:
            raise ValueError("num_trials and test_size must be positive")
        if not self.methods:
            raise ValueError("need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    @property
    def pool_size(self) -> int:
        return max(self.training_sizes) + self.test_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["training_sizes"] = list(self.training_sizes)
        d["methods"] = list(self.methods)
        d["clusters"] = [list(c) for c in self.clusters]
        return d

    def config_hash(self) -> str:
        return config_hash(self.to_dict())

    def cluster_structure(self) -> ClusterStructure:
        return ClusterStructure(self.clusters, self.num_types)

    def learn_config(self, method: str) -> LearnConfig:
        return LearnConfig.for_method(
            method, self.alpha_s, self.alpha_g, self.alpha_p,
            clusters=self.cluster_structure(), inner_max=self.inner_max,
            outer_max=self.outer_max)


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def trial_seed(master: int, trial: int) -> int:
    return master + TRIAL_SEED_STRIDE * trial


def max_workers() -> int:
    cap = os.environ.get("HG_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def split_pool(data: Dataset, plan: ExperimentPlan, seed: int):
    """Test set is the last ``test_size`` sequences; training subsets are
    nested prefixes of a random permutation of the rest."""
    pool = data[: len(data) - plan.test_size]
    test = data[len(data) - plan.test_size:]
    order = make_rng(seed).permutation(len(pool))
    return {c: pool.subset(order[:c]) for c in plan.training_sizes}, test


def _failed_row(base: dict, exc: Exception) -> dict:
    row = dict(base)
    row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def run_trial(plan: ExperimentPlan, trial: int) -> list:
    seed = trial_seed(plan.seed, trial)
    data, truth = make_synthetic(plan.pool_size, plan.horizon, plan.family, seed=seed,
                                 num_types=plan.num_types)
    trains, test = split_pool(data, plan, seed)
    digest = plan.config_hash()
    rows = []
    for C in plan.training_sizes:
        train = trains[C]
        basis = select_basis(train, rho=plan.rho, horizon=plan.horizon)
        stats = excitation_stats(train, basis)
        for method in plan.methods:
            cfg = plan.learn_config(method)
            base = {k: "" for k in TRIAL_COLUMNS}
            base.update(method=method, C=C, trial=trial, trial_seed=seed, config_hash=digest,
                        alpha_s=cfg.alpha_s, alpha_g=cfg.alpha_g, alpha_p=cfg.alpha_p,
                        M=basis.M, omega0=basis.omega0)
            try:
                start = time.perf_counter()
                params, report = fit(train, basis, replace(cfg, seed=seed), stats=stats)
                elapsed = time.perf_counter() - start
                ev = evaluate(params, basis, truth, test)
            except Exception as exc:  # recorded, not fatal
                log.warning("trial %d C=%d %s failed: %s", trial, C, method, exc)
                rows.append(_failed_row(base, exc))
                continue
            row = dict(base)
            row.update(loglike=ev.loglike_test, e_mu=ev.e_mu, e_phi=ev.e_phi,
                       edge_precision=ev.edge_precision, edge_recall=ev.edge_recall,
                       edge_f1=ev.edge_f1, absent_precision=ev.absent_precision,
                       absent_recall=ev.absent_recall, absent_f1=ev.absent_f1,
                       absent_recovered=ev.absent_recovered,
                       outer_iterations=report.outer_iterations,
                       converged=report.converged, fit_seconds=round(elapsed, 3),
                       status="ok")
            rows.append(row)
            log.info("trial %d C=%d %s: loglike %.1f e_phi %.3f absent_f1 %.2f",
                     trial, C, method, ev.loglike_test, ev.e_phi, ev.absent_f1)
    return rows


def summarize(rows: list, plan: ExperimentPlan | None = None) -> dict:
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], int(r["C"])), []).append(r)
    entries = []
    for (method, C), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        ok = [r for r in rs if r["status"] == "ok"]
        entry = {"method": method, "C": C, "n_ok": len(ok), "n_failed": len(rs) - len(ok)}
        for m in METRICS:
            vals = np.array([float(r[m]) for r in ok], dtype=float)
            entry[f"{m}_mean"] = float(vals.mean()) if vals.size else None
            entry[f"{m}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else (
                0.0 if vals.size else None)
        entries.append(entry)
    out = {"entries": entries}
    if plan is not None:
        out["plan"] = plan.to_dict()
        out["config_hash"] = plan.config_hash()
    return out


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})


def _fmt(x):
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return "" if x is None else x


def write_outputs(rows: list, summary: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trials.csv", TRIAL_COLUMNS, rows)
    entries = summary["entries"]
    cols = ["method", "C", "n_ok", "n_failed"] + [f"{m}_{s}" for m in METRICS
                                                   for s in ("mean", "std")]
    _write_csv(out / "summary.csv", cols, entries)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for m in METRICS:
        curve = [{"metric": m, "method": e["method"], "C": e["C"],
                  "mean": e[f"{m}_mean"], "std": e[f"{m}_std"]} for e in entries]
        _write_csv(out / f"curve_{m}.csv", ["metric", "method", "C", "mean", "std"], curve)


def run_experiment(plan: ExperimentPlan, out_dir=None, workers: int | None = None) -> dict:
    """Run every trial, write the tables to ``out_dir`` (if given), return the summary.

    Trials are independent and may run in separate processes; results are
    merged in trial order so the outputs do not depend on ``workers``.
    """
    workers = min(workers or max_workers(), plan.num_trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(run_trial, [plan] * plan.num_trials,
                                      range(plan.num_trials)))
    else:
        per_trial = [run_trial(plan, t) for t in range(plan.num_trials)]
    rows = [r for rs in per_trial for r in rs]
    summary = summarize(rows, plan)
    if out_dir is not None:
        write_outputs(rows, summary, out_dir)
    summary["rows"] = rows
    return summary


def log_grid(lo: float = 1e-2, hi: float = 1e4, num: int = 7) -> np.ndarray:
    if not (lo > 0 and hi >= lo and num >= 1):
        raise ValueError("need 0 < lo <= hi and num >= 1")
    grid = np.logspace(math.log10(lo), math.log10(hi), num)
    grid[0], grid[-1] = lo, hi
    return grid


@dataclass(frozen=True)
class SweepPlan:
    grid: tuple = tuple(log_grid())
    profiles: tuple = ("alpha_s", "alpha_g", "alpha_p")
    fixed: dict = field(default_factory=lambda: dict(PAPER_ALPHAS))
    clusters: tuple = ((0, 1, 2), (3, 4))
    inner_max: int = 100
    outer_max: int = 50
    seed: int = 0

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ValueError("grid must be nonempty")
        for p in self.profiles:
            if p not in PAPER_ALPHAS:
                raise ValueError(f"unknown profile {p!r}")


def sweep_hyperparameters(train: Dataset, test: Dataset, plan: SweepPlan | None = None,
                          basis=None, truth=None, out_path=None) -> list:
    """Fit on ``train`` at each grid point of each profile, record held-out loglike.

    A profile varies one weight over the grid and fixes the others.
    """
    plan = plan or SweepPlan()
    basis = basis or select_basis(train)
    stats = excitation_stats(train, basis)
    clusters = ClusterStructure(plan.clusters, train.num_types)
    rows = []
    for profile in plan.profiles:
        for value in plan.grid:
            weights = dict(plan.fixed)
            weights[profile] = float(value)
            d = dict(weights, profile=profile, clusters=[list(c) for c in plan.clusters],
                     seed=plan.seed, inner_max=plan.inner_max, outer_max=plan.outer_max)
            row = {"profile": profile, "value": float(value), **weights,
                   "config_hash": config_hash(d), "loglike": "", "absent_f1": ""}
            try:
                cfg = LearnConfig(clusters=clusters if weights["alpha_p"] > 0 else None,
                                  inner_max=plan.inner_max, outer_max=plan.outer_max,
                                  seed=plan.seed, **weights)
                params, _ = fit(train, basis, cfg, stats=stats)
                row["loglike"] = loglike_test(params, basis, test)
                if truth is not None:
                    row["absent_f1"] = score_graph(extract_graph(params), truth.graph()).absent_f1
                row["status"] = "ok"
            except Exception as exc:  # recorded, not fatal
                row["status"] = f"error: {type(exc).__name__}: {exc}"
            rows.append(row)
            log.info("sweep %s=%g: %s", profile, value, row["loglike"])
    if out_path is not None:
        _write_csv(out_path, SWEEP_COLUMNS, rows)
    return rows


def profile_spread(rows: list, profile: str) -> float:
    """``(max - min) / |mean|`` of held-out loglike along one profile."""
    vals = np.array([float(r["loglike"]) for r in rows
                     if r["profile"] == profile and r["status"] == "ok"])
    if vals.size == 0:
        raise ValueError(f"no successful points for profile {profile!r}")
    return float((vals.max() - vals.min()) / abs(vals.mean()))
