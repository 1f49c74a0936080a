"""EM learner with sparse-group-lasso and pairwise-similarity penalties.

Each inner iteration attributes every event to the baseline or to a
(basis, earlier event) pair (E-step), then updates ``mu`` in closed form and
every coefficient ``A[u, v, m]`` as the nonnegative root of a scalar
quadratic. The group penalty enters the quadratic through the majorizer
``||a|| <= (||a||^2 + ||a_k||^2) / (2 ||a_k||)``. After the inner loop
settles, a proximal sweep applies soft-thresholding and group shrinkage,
which is what produces exact all-zero impact functions.

Variants by penalty weights::

    MLE       alpha_s = alpha_g = alpha_p = 0
    MLE-S     alpha_g = alpha_p = 0
    MLE-GL    alpha_s = alpha_p = 0
    MLE-SGL   alpha_p = 0
    MLE-SGLP  all active, clusters given
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisConfig
from .core import (ExcitationStats, event_intensities, excitation_stats,
                   log_likelihood_stats)
from .model import ClusterStructure, Dataset, EventSequence, ModelParams
from .simulate import make_rng

log = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny

METHODS = {
    "MLE": dict(alpha_s=0.0, alpha_g=0.0, alpha_p=0.0),
    "MLE-S": dict(alpha_g=0.0, alpha_p=0.0),
    "MLE-GL": dict(alpha_s=0.0, alpha_p=0.0),
    "MLE-SGL": dict(alpha_p=0.0),
    "MLE-SGLP": dict(),
}


@dataclass(frozen=True)
class LearnConfig:
    alpha_s: float = 0.0
    alpha_g: float = 0.0
    alpha_p: float = 0.0
    clusters: ClusterStructure | None = None
    eta: float | None = None  # None: 1e-2 * total_time / total_events
    inner_max: int = 100
    outer_max: int = 50
    inner_tol: float = 1e-5
    outer_tol: float = 1e-5
    seed: int = 0
    # halve eta until a prox sweep does not raise the penalized objective
    line_search: bool = False

    def __post_init__(self):
        for name in ("alpha_s", "alpha_g", "alpha_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.alpha_p > 0 and self.clusters is None:
            raise ValueError("alpha_p > 0 requires a cluster structure")
        if self.inner_max < 1 or self.outer_max < 1:
            raise ValueError("iteration caps must be >= 1")

    @classmethod
    def for_method(cls, method: str, alpha_s=10.0, alpha_g=100.0, alpha_p=1000.0,
                   clusters=None, **kw) -> "LearnConfig":
        """Config for a named variant; zeroes the penalties that variant drops."""
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
        weights = dict(alpha_s=alpha_s, alpha_g=alpha_g, alpha_p=alpha_p)
        weights.update(METHODS[method])
        if weights["alpha_p"] == 0:
            clusters = None
        return cls(clusters=clusters, **weights, **kw)

    def step_size(self, stats: ExcitationStats) -> float:
        if self.eta is not None:
            return self.eta
        return 1e-2 * stats.total_time / max(stats.num_events, 1)


@dataclass
class Responsibilities:
    """EM attribution of events.

    ``baseline[i]`` is p_ii for event i (sequences concatenated). ``excited[i]``
    is the total attributed to earlier events, ``sum_j sum_m p_ij^m``.
    ``attributed[u, v, m]`` sums p_ij^m over pairs with ``u_i = u`` and
    ``u_j = v`` in the same sequence. ``baseline_by_type[u]`` sums p_ii over
    type-u events.
    """

    baseline: np.ndarray
    excited: np.ndarray
    attributed: np.ndarray
    baseline_by_type: np.ndarray
    intensity: np.ndarray


def _stats_for(data, basis, stats):
    if stats is None:
        stats = excitation_stats(data, basis)
    return stats


def e_step(params: ModelParams, basis: BasisConfig, data: Dataset,
           stats: ExcitationStats | None = None) -> Responsibilities:
    stats = _stats_for(data, basis, stats)
    return _e_step(params, stats)


def _e_step(params: ModelParams, stats: ExcitationStats,
            lam: np.ndarray | None = None) -> Responsibilities:
    if lam is None:
        lam = event_intensities(params, stats)
    if np.any(lam <= 0):
        raise ValueError("an observed event has zero intensity under the current parameters")
    U, M = stats.num_types, params.num_basis
    inv = 1.0 / lam
    mu_i = params.mu[stats.types]
    baseline = mu_i * inv
    excited = (lam - mu_i) * inv
    # sum_{i: u_i = u} G[i, v, m] / lambda_i, then scale by A[u, v, m]
    weighted = np.zeros((U, U * M))
    for u, (idx, feats) in enumerate(stats.blocks):
        if idx.size:
            weighted[u] = inv[idx] @ feats
    attributed = params.A * weighted.reshape(U, U, M)
    by_type = np.bincount(stats.types, weights=baseline, minlength=U)
    return Responsibilities(baseline, excited, attributed, by_type, lam)


def pair_responsibilities(params: ModelParams, basis: BasisConfig, seq: EventSequence):
    """Full ``(p_ii, p_ij^m)`` for one sequence, by direct pairwise evaluation.

    Returns ``baseline`` (N,) and ``pairs`` (N, N, M) with ``pairs[i, j]``
    zero unless j precedes i.
    """
    t, u = seq.times, seq.types
    n = t.size
    tau = t[:, None] - t[None, :]
    earlier = np.tri(n, k=-1, dtype=bool)
    kern = basis.evaluate(np.where(earlier, tau, 0.0)) * earlier[..., None]
    pairs = params.A[u[:, None], u[None, :]] * kern
    lam = params.mu[u] + pairs.sum(axis=(1, 2))
    return params.mu[u] / lam, pairs / lam[:, None, None]


def update_mu(resp: Responsibilities, data: Dataset) -> np.ndarray:
    return resp.baseline_by_type / data.total_time


def solve_update_quadratic(quad, lin, const):
    """Nonnegative root of ``quad x^2 + lin x + const = 0`` (elementwise).

    ``quad >= 0`` and ``const <= 0`` are assumed. Falls back to the linear
    root when ``quad == 0``; raises if that root does not exist.
    """
    quad, lin, const = np.broadcast_arrays(*(np.asarray(x, dtype=float)
                                             for x in (quad, lin, const)))
    out = np.zeros(quad.shape)
    qpos = quad > 0
    disc = np.sqrt(np.maximum(lin * lin - 4.0 * quad * const, 0.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # two algebraically equal forms; pick the one free of cancellation
        stable = -2.0 * const / (lin + disc)
        direct = (-lin + disc) / (2.0 * quad)
        quadratic = np.where(lin >= 0, np.where(lin + disc > 0, stable, 0.0), direct)
        linear = np.where(lin > 0, -const / lin, 0.0)
    bad = ~qpos & (lin <= 0) & (const < 0)
    if np.any(bad):
        raise ValueError("no nonnegative stationary point: linear coefficient <= 0 "
                         "with no quadratic term")
    out = np.maximum(np.where(qpos, quadratic, linear), 0.0)
    if not np.all(np.isfinite(out)):
        raise ValueError("coefficient update overflowed")
    # a positive attributed mass needs a positive coefficient; guard underflow
    return np.where(const < 0, np.maximum(out, _TINY), out)


def _pairwise_terms(cfg: LearnConfig, U: int):
    """Peer matrix and the within-cluster mask on (u, v) coefficient groups."""
    if cfg.alpha_p == 0 or cfg.clusters is None:
        z = np.zeros((U, U))
        return z, z, np.zeros(U)
    member = cfg.clusters.membership()
    return member, member.astype(bool).astype(float), member.sum(axis=1)


def _peer_pull(A_ref, member):
    """sum_{w in C_u} A_ref[w, v] + sum_{w in C_v} A_ref[u, w] for every (u, v)."""
    rows = np.einsum("uw,wvm->uvm", member, A_ref)
    cols = np.einsum("vw,uwm->uvm", member, A_ref)
    return rows + cols


def update_A(resp: Responsibilities, data: Dataset, basis: BasisConfig,
             params_prev: ModelParams, cfg: LearnConfig,
             stats: ExcitationStats | None = None) -> np.ndarray:
    """Closed-form coefficient update given the current attribution.

    Groups that are exactly zero are held at zero while ``alpha_g > 0``.
    The similarity penalty acts only on groups (u, v) with v a peer of u.
    """
    stats = _stats_for(data, basis, stats)
    A_prev = params_prev.A
    U = A_prev.shape[0]
    norms = np.linalg.norm(A_prev, axis=2)
    member, mask, sizes = _pairwise_terms(cfg, U)
    with np.errstate(divide="ignore"):
        group = np.where(norms > 0, cfg.alpha_g / norms, 0.0) if cfg.alpha_g > 0 else np.zeros((U, U))
    pair_w = cfg.alpha_p * mask
    quad = (group + 2.0 * (sizes[:, None] + sizes[None, :]) * pair_w)[..., None]
    lin = (stats.compensator_total[None, :, :] + cfg.alpha_s
           - 2.0 * pair_w[..., None] * _peer_pull(A_prev, member))
    const = -resp.attributed
    A = solve_update_quadratic(quad, lin, const)
    if cfg.alpha_g > 0:
        A[norms == 0] = 0.0
    return A


def soft_threshold(x, level):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def prox_group(candidate, grad, cfg: LearnConfig, eta: float | None = None) -> np.ndarray:
    """Sparse-group-lasso proximal step for one coefficient group.

    Minimises ``||a - v||^2 / (2 eta) + alpha_s ||a||_1 + alpha_g ||a||_2``
    over ``a >= 0`` with ``v = candidate - eta * grad``. Negative entries are
    projected out before the group test, so the returned vector is the exact
    constrained minimiser; a zeroed group is an all-zero array.
    """
    eta = cfg.eta if eta is None else eta
    if eta is None or not eta > 0:
        raise ValueError("prox_group needs a positive step size")
    v = np.asarray(candidate, dtype=float) - eta * np.asarray(grad, dtype=float)
    z = np.maximum(soft_threshold(v, eta * cfg.alpha_s), 0.0)
    norm = float(np.linalg.norm(z))
    if norm <= eta * cfg.alpha_g:
        return np.zeros_like(z)
    return (1.0 - eta * cfg.alpha_g / norm) * z


def _xlogy(x, y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, y, 1.0)), 0.0)


def pairwise_penalty(A, A_ref, cfg: LearnConfig) -> float:
    """Similarity penalty with the peer side frozen at ``A_ref``.

    ``sum over groups (u, v), v a peer of u, of
    sum_{w in C_u} ||A[u,v] - A_ref[w,v]||^2 + sum_{w in C_v} ||A[u,v] - A_ref[u,w]||^2``.
    Passing ``A_ref = A`` gives the unfrozen penalty.
    """
    if cfg.alpha_p == 0 or cfg.clusters is None:
        return 0.0
    member = cfg.clusters.membership()
    sizes = member.sum(axis=1)
    # expand the squares: |C_u| a^2 - 2 a pull + sum of squared peers
    sq = A_ref ** 2
    peer_sq = np.einsum("uw,wvm->uvm", member, sq) + np.einsum("vw,uwm->uvm", member, sq)
    scale = (sizes[:, None] + sizes[None, :])[..., None]
    terms = scale * A ** 2 - 2.0 * A * _peer_pull(A_ref, member) + peer_sq
    return float((terms * member[..., None]).sum())


def smooth_objective(A, resp: Responsibilities, stats: ExcitationStats, A_ref,
                     cfg: LearnConfig) -> float:
    """A-dependent part of the negated EM surrogate plus the similarity penalty."""
    H = stats.compensator_total[None, :, :]
    data_term = float((A * H).sum() - _xlogy(resp.attributed, A).sum())
    return data_term + cfg.alpha_p * pairwise_penalty(A, A_ref, cfg)


def smooth_gradient(A, resp: Responsibilities, stats: ExcitationStats, A_ref,
                    cfg: LearnConfig) -> np.ndarray:
    """Gradient of :func:`smooth_objective` with respect to ``A``.

    Where ``A`` is zero the attributed mass is zero as well and the log term
    drops out.
    """
    U = A.shape[0]
    S = resp.attributed
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(S > 0, S / np.where(A > 0, A, 1.0), 0.0)
    grad = np.broadcast_to(stats.compensator_total[None], A.shape) - ratio
    member, mask, sizes = _pairwise_terms(cfg, U)
    if cfg.alpha_p > 0:
        pull = _peer_pull(A_ref, member)
        scale = (sizes[:, None] + sizes[None, :])[..., None]
        grad = grad + cfg.alpha_p * mask[..., None] * 2.0 * (scale * A - pull)
    return grad


def surrogate_objective(params: ModelParams, resp: Responsibilities,
                        stats: ExcitationStats, A_ref, cfg: LearnConfig) -> float:
    """Parameter-dependent part of the penalized EM surrogate ``F``.

    ``resp`` and ``A_ref`` fix the current iterate; terms that do not depend
    on ``params`` are dropped, so only differences are meaningful.
    """
    mu_term = float(stats.total_time * params.mu.sum()
                    - _xlogy(resp.baseline_by_type, params.mu).sum())
    A = params.A
    penalty = cfg.alpha_s * float(A.sum()) + cfg.alpha_g * float(np.linalg.norm(A, axis=2).sum())
    return mu_term + smooth_objective(A, resp, stats, A_ref, cfg) + penalty


def penalized_objective(params: ModelParams, stats: ExcitationStats, cfg: LearnConfig,
                        lam: np.ndarray | None = None) -> float:
    """``-loglik + alpha_s |A|_1 + alpha_g |A|_{1,2} + alpha_p E(A)``."""
    A = params.A
    return (-log_likelihood_stats(params, stats, lam=lam)
            + cfg.alpha_s * float(A.sum())
            + cfg.alpha_g * float(np.linalg.norm(A, axis=2).sum())
            + cfg.alpha_p * pairwise_penalty(A, A, cfg))


@dataclass
class FitReport:
    objective: list = field(default_factory=list)
    loglike: list = field(default_factory=list)
    surrogate_decrease: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
    final_objective: float = math.nan
    final_loglike: float = math.nan
    zero_groups: int = 0
    eta: float = math.nan
    prox_steps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "objective_trace": self.objective,
            "loglike_trace": self.loglike,
            "surrogate_decrease_trace": self.surrogate_decrease,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "final_loglike": self.final_loglike,
            "zero_groups": self.zero_groups,
            "eta": self.eta,
            "prox_steps": self.prox_steps,
        }


def initial_params(stats: ExcitationStats, basis: BasisConfig, seed: int) -> ModelParams:
    rng = make_rng(seed)
    U, M = stats.num_types, basis.M
    rate = max(stats.num_events, 1) / (U * stats.total_time)
    kbar = float(np.mean(basis.total_mass()))
    mu = rng.uniform(0.0, rate, size=U)
    A = rng.uniform(0.0, 1.0 / (U * M * kbar), size=(U, U, M))
    return ModelParams(mu, A)


def _rel_change(new: ModelParams, old: ModelParams) -> float:
    num = math.sqrt(float(((new.mu - old.mu) ** 2).sum() + ((new.A - old.A) ** 2).sum()))
    den = math.sqrt(float((old.mu ** 2).sum() + (old.A ** 2).sum()))
    return num / max(den, 1e-300)


def em_iteration(params: ModelParams, stats: ExcitationStats, cfg: LearnConfig,
                 lam: np.ndarray | None = None):
    """One (E-step, mu update, A update). Returns ``(new_params, resp)``."""
    resp = _e_step(params, stats, lam)
    mu = resp.baseline_by_type / stats.total_time
    A = update_A(resp, None, None, params, cfg, stats=stats)
    return ModelParams(mu, A), resp


def prox_sweep(params: ModelParams, params_prev: ModelParams, resp: Responsibilities,
               stats: ExcitationStats, cfg: LearnConfig, eta: float) -> ModelParams:
    """Shrink every coefficient group, row-major over (u, v)."""
    grad = smooth_gradient(params_prev.A, resp, stats, params_prev.A, cfg)
    A = params.A.copy()
    U = A.shape[0]
    for u in range(U):
        for v in range(U):
            A[u, v] = prox_group(params.A[u, v], grad[u, v], cfg, eta=eta)
    return ModelParams(params.mu, A)


def backtracking_prox(params: ModelParams, params_prev: ModelParams, resp: Responsibilities,
                      stats: ExcitationStats, cfg: LearnConfig, eta: float,
                      max_halvings: int = 60):
    """Prox sweep with the step halved until the penalized objective does not rise.

    The linearised step only majorises the objective for a small enough
    ``eta``. Returns ``(params, eta_used)``; ``eta_used`` is 0 when no step
    was accepted and ``params`` comes back unchanged.
    """
    current = penalized_objective(params, stats, cfg)
    slack = 1e-12 * max(abs(current), 1.0)
    for _ in range(max_halvings):
        trial = prox_sweep(params, params_prev, resp, stats, cfg, eta)
        lam = event_intensities(trial, stats)
        if np.all(lam > 0) and penalized_objective(trial, stats, cfg, lam=lam) <= current + slack:
            return trial, eta
        eta *= 0.5
    return params, 0.0


def fit(data: Dataset, basis: BasisConfig, cfg: LearnConfig | None = None,
        init: ModelParams | None = None, stats: ExcitationStats | None = None):
    """Learn ``(mu, A)``; returns ``(params, FitReport)``."""
    cfg = cfg or LearnConfig()
    if len(data) == 0 or data.total_events == 0:
        raise ValueError("cannot fit an empty dataset")
    if cfg.clusters is not None and cfg.clusters.num_types != data.num_types:
        raise ValueError("cluster structure does not match the number of types")
    stats = _stats_for(data, basis, stats)
    eta = cfg.step_size(stats)
    params = init if init is not None else initial_params(stats, basis, cfg.seed)
    report = FitReport(eta=eta)
    sparse = cfg.alpha_s > 0 or cfg.alpha_g > 0
    lam = event_intensities(params, stats)
    for outer in range(cfg.outer_max):
        outer_start = params
        inner = 0
        prev, resp = params, None
        for inner in range(1, cfg.inner_max + 1):
            new, resp = em_iteration(params, stats, cfg, lam)
            before = surrogate_objective(params, resp, stats, params.A, cfg)
            after = surrogate_objective(new, resp, stats, params.A, cfg)
            report.surrogate_decrease.append(before - after)
            prev, params = params, new
            lam = event_intensities(params, stats)
            report.loglike.append(log_likelihood_stats(params, stats, lam=lam))
            report.objective.append(penalized_objective(params, stats, cfg, lam=lam))
            if _rel_change(params, prev) < cfg.inner_tol:
                break
        report.inner_iterations.append(inner)
        if sparse:
            if cfg.line_search:
                params, step = backtracking_prox(params, prev, resp, stats, cfg, eta)
            else:
                params, step = prox_sweep(params, prev, resp, stats, cfg, eta), eta
            report.prox_steps.append(step)
            lam = event_intensities(params, stats)
        report.outer_iterations = outer + 1
        change = _rel_change(params, outer_start)
        log.debug("outer %d: %d inner iterations, change %.3g", outer, inner, change)
        if change < cfg.outer_tol:
            report.converged = True
            break
    report.final_loglike = log_likelihood_stats(params, stats)
    report.final_objective = penalized_objective(params, stats, cfg)
    report.zero_groups = int((np.linalg.norm(params.A, axis=2) == 0).sum())
    if not report.converged:
        log.warning("fit stopped at the outer iteration cap without converging")
    return params, report
