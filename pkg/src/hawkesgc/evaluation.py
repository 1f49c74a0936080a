"""Held-out likelihood, parameter errors and Granger-graph scoring."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .basis import BasisConfig
from .core import DEFAULT_GRAPH_TOL, extract_graph, impact_matrix, log_likelihood
from .model import Dataset, GrangerGraph, ModelParams
from .simulate import GroundTruth


def loglike_test(params: ModelParams, basis: BasisConfig, test_data: Dataset) -> float:
    return log_likelihood(params, basis, test_data)


def relative_error_mu(est, truth) -> float:
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError("est and truth must have the same shape")
    scale = np.linalg.norm(truth)
    if scale == 0:
        raise ValueError("relative error undefined for a zero truth vector")
    return float(np.linalg.norm(est - truth) / scale)


def kernel_error_table(est_values, true_values, grid) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair ``int |est - true|`` and ``int true`` by the trapezoid rule.

    ``est_values`` and ``true_values`` have shape (..., G) on ``grid``.
    """
    est_values = np.asarray(est_values, dtype=float)
    true_values = np.asarray(true_values, dtype=float)
    err = trapezoid(np.abs(est_values - true_values), grid, axis=-1)
    mass = trapezoid(true_values, grid, axis=-1)
    return err, mass


def relative_kernel_error(est_values, true_values, grid) -> float:
    """Mean of ``int |est - true| / int true`` over pairs with positive true mass."""
    err, mass = kernel_error_table(est_values, true_values, grid)
    keep = mass > 0
    if not keep.any():
        return 0.0 if np.all(err == 0) else float("inf")
    return float(np.mean(err[keep] / mass[keep]))


def _grid(horizon: float, grid_step: float | None) -> np.ndarray:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    step = horizon / 2000 if grid_step is None else float(grid_step)
    if not step > 0:
        raise ValueError("grid_step must be positive")
    n = max(int(round(horizon / step)), 1)
    return np.linspace(0.0, horizon, n + 1)


def relative_error_phi(est_params: ModelParams, est_basis: BasisConfig, truth: GroundTruth,
                       horizon: float | None = None, grid_step: float | None = None) -> float:
    """Average relative L1 kernel error; pairs whose true kernel is zero are skipped.

    The integrals run over ``[0, horizon]`` (default: the basis horizon).
    """
    grid = _grid(est_basis.horizon if horizon is None else horizon, grid_step)
    return relative_kernel_error(impact_matrix(est_params, est_basis, grid),
                                 truth.kernel_values(grid), grid)


def phi_error_pairs(est_params: ModelParams, est_basis: BasisConfig, truth: GroundTruth,
                    horizon: float | None = None, grid_step: float | None = None) -> list:
    grid = _grid(est_basis.horizon if horizon is None else horizon, grid_step)
    est = impact_matrix(est_params, est_basis, grid)
    err, mass = kernel_error_table(est, truth.kernel_values(grid), grid)
    U = err.shape[0]
    rows = []
    for u in range(U):
        for v in range(U):
            rows.append({
                "target": u, "source": v, "abs_error": float(err[u, v]),
                "true_mass": float(mass[u, v]),
                "est_mass": float(trapezoid(est[u, v], grid)),
                "relative_error": float(err[u, v] / mass[u, v]) if mass[u, v] > 0 else None,
            })
    return rows


def _prf(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return float(precision), float(recall), float(f1)


@dataclass(frozen=True)
class GraphScore:
    precision: float
    recall: float
    f1: float
    absent_precision: float
    absent_recall: float
    absent_f1: float
    absent_recovered: int
    absent_total: int


def score_graph(est: GrangerGraph, truth: GrangerGraph) -> GraphScore:
    """Confusion-matrix scores with present edges as positives, and the same
    with absent edges as positives. Self-edges count like any other pair.

    An empty prediction set has precision 1 by convention.
    """
    if est.num_types != truth.num_types:
        raise ValueError(f"graphs differ in size: {est.num_types} vs {truth.num_types}")
    e, t = est.adjacency, truth.adjacency
    tp, fp, fn = int((e & t).sum()), int((e & ~t).sum()), int((~e & t).sum())
    tn = int((~e & ~t).sum())
    p, r, f = _prf(tp, fp, fn)
    ap, ar, af = _prf(tn, fn, fp)
    return GraphScore(p, r, f, ap, ar, af, tn, int((~t).sum()))


@dataclass
class EvalReport:
    loglike_test: float
    e_mu: float
    e_phi: float
    edge_precision: float
    edge_recall: float
    edge_f1: float
    absent_precision: float
    absent_recall: float
    absent_f1: float
    absent_recovered: int
    absent_total: int
    pairs: list = field(default_factory=list)

    def to_dict(self, include_pairs: bool = False) -> dict:
        d = asdict(self)
        if not include_pairs:
            d.pop("pairs")
        return d


def evaluate(params: ModelParams, basis: BasisConfig, truth: GroundTruth,
             test_data: Dataset | None = None, tol: float = DEFAULT_GRAPH_TOL,
             grid_step: float | None = None) -> EvalReport:
    ll = loglike_test(params, basis, test_data) if test_data is not None else float("nan")
    score = score_graph(extract_graph(params, tol), truth.graph())
    return EvalReport(
        loglike_test=ll,
        e_mu=relative_error_mu(params.mu, truth.mu),
        e_phi=relative_error_phi(params, basis, truth, grid_step=grid_step),
        edge_precision=score.precision, edge_recall=score.recall, edge_f1=score.f1,
        absent_precision=score.absent_precision, absent_recall=score.absent_recall,
        absent_f1=score.absent_f1, absent_recovered=score.absent_recovered,
        absent_total=score.absent_total,
        pairs=phi_error_pairs(params, basis, truth, grid_step=grid_step),
    )


def threshold_sweep(params: ModelParams, truth: GrangerGraph, thresholds=None) -> list:
    """Edge precision and recall as the graph-extraction threshold varies."""
    norms = params.group_norms()
    if thresholds is None:
        pos = norms[norms > 0]
        thresholds = np.concatenate([[0.0], np.unique(pos)]) if pos.size else np.array([0.0])
    rows = []
    for tol in np.asarray(thresholds, dtype=float):
        s = score_graph(GrangerGraph(norms > tol), truth)
        rows.append({"threshold": float(tol), "precision": s.precision, "recall": s.recall,
                     "f1": s.f1, "absent_f1": s.absent_f1})
    return rows
