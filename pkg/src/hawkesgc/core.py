"""Intensity, log-likelihood and Granger-graph extraction for the basis model.

The excitation felt by event i is ``sum_v sum_m A[u_i, v, m] G[i, v, m]`` where
``G[i, v, m]`` sums ``kappa_m(t_i - t_j)`` over earlier type-v events j. ``G``
and the compensator totals depend only on the data and the basis, so they are
computed once (:func:`excitation_stats`) and every likelihood or EM step after
that is linear in the number of events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .basis import BasisConfig
from .model import Dataset, EventSequence, GrangerGraph, ModelParams

DEFAULT_GRAPH_TOL = 1e-7


@dataclass(frozen=True)
class ExcitationStats:
    """Data-and-basis sufficient statistics.

    Attributes
    ----------
    types : (N,) int
        Types of all events, sequences concatenated.
    offsets : (C + 1,) int
        ``types[offsets[c]:offsets[c + 1]]`` belongs to sequence c.
    features : (N, U, M)
        Excitation features ``G``.
    compensator : (C, U, M)
        ``sum_{i: u_i = v} K_m(T_c - t_i)`` per sequence.
    horizons : (C,)
    blocks : tuple of (indices, (N_u, U * M) array)
        Row indices and contiguous features of each type's events.
    """

    types: np.ndarray
    offsets: np.ndarray
    features: np.ndarray
    compensator: np.ndarray
    horizons: np.ndarray
    num_types: int
    blocks: tuple = ()
    compensator_total: np.ndarray = field(init=False, repr=False)
    seq_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.blocks:
            _, U, M = self.features.shape
            flat = self.features.reshape(self.types.size, U * M)
            blocks = []
            for u in range(self.num_types):
                idx = np.flatnonzero(self.types == u)
                blocks.append((idx, np.ascontiguousarray(flat[idx])))
            object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "compensator_total", self.compensator.sum(axis=0))
        object.__setattr__(self, "seq_index", np.repeat(np.arange(self.horizons.size),
                                                        np.diff(self.offsets)))

    @property
    def num_events(self) -> int:
        return int(self.types.size)

    @property
    def total_time(self) -> float:
        return float(self.horizons.sum())

    def type_counts(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.num_types)


def sequence_features(seq: EventSequence, num_types: int, basis: BasisConfig) -> np.ndarray:
    return _backend.excitation_features(
        np.ascontiguousarray(seq.times), np.ascontiguousarray(seq.types),
        num_types, np.ascontiguousarray(basis.centers), basis.sigma)


def excitation_stats(data: Dataset, basis: BasisConfig) -> ExcitationStats:
    U, M = data.num_types, basis.M
    feats, comp = [], np.zeros((len(data), U, M))
    lengths = []
    for c, seq in enumerate(data.sequences):
        feats.append(sequence_features(seq, U, basis))
        K = basis.cumulative_all(seq.horizon - seq.times)
        np.add.at(comp[c], seq.types, K)
        lengths.append(len(seq))
    offsets = np.concatenate([[0], np.cumsum(lengths, dtype=np.int64)])
    types = (np.concatenate([s.types for s in data.sequences])
             if len(data) else np.empty(0, dtype=np.int64))
    features = np.concatenate(feats) if feats else np.empty((0, U, M))
    horizons = np.array([s.horizon for s in data.sequences], dtype=float)
    return ExcitationStats(types.astype(np.int64), offsets, features, comp, horizons, U)


def _check_dims(params: ModelParams, num_types: int, basis: BasisConfig):
    if params.num_types != num_types:
        raise ValueError(f"model has {params.num_types} types, data has {num_types}")
    if params.num_basis != basis.M:
        raise ValueError(f"model has {params.num_basis} bases, basis config has {basis.M}")


def event_intensities(params: ModelParams, stats: ExcitationStats) -> np.ndarray:
    """Intensity of each observed event's own type at its time."""
    U = stats.num_types
    lam = np.empty(stats.num_events)
    rows = params.A.reshape(U, -1)
    for u, (idx, feats) in enumerate(stats.blocks):
        lam[idx] = params.mu[u] + feats @ rows[u]
    return lam


def log_likelihood_stats(params: ModelParams, stats: ExcitationStats,
                         per_sequence: bool = False, lam: np.ndarray | None = None):
    """Log-likelihood from precomputed statistics.

    ``lam`` may pass event intensities already computed for ``params``.
    """
    if lam is None:
        lam = event_intensities(params, stats)
    comp = (stats.horizons * params.mu.sum()
            + np.einsum("uvm,cvm->c", params.A, stats.compensator))
    with np.errstate(divide="ignore"):
        logs = np.log(lam)
    if not per_sequence:
        return float(logs.sum() - comp.sum())
    return np.bincount(stats.seq_index, weights=logs, minlength=stats.horizons.size) - comp


def log_likelihood(params: ModelParams, basis: BasisConfig, data: Dataset) -> float:
    """Log-likelihood of ``data``; ``-inf`` if an event has zero intensity."""
    _check_dims(params, data.num_types, basis)
    return log_likelihood_stats(params, excitation_stats(data, basis))


def impact_function(params: ModelParams, basis: BasisConfig, u: int, v: int, t):
    """``phi_{uv}(t)``: influence of a type-v event on type u after lag ``t``."""
    U = params.num_types
    if not (0 <= u < U and 0 <= v < U):
        raise IndexError(f"type index outside range({U})")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("lag must be nonnegative")
    out = basis.evaluate(t) @ params.A[u, v]
    return float(out) if out.ndim == 0 else out


def impact_matrix(params: ModelParams, basis: BasisConfig, t) -> np.ndarray:
    """All impact functions on a grid; shape (U, U, len(t))."""
    return np.einsum("uvm,gm->uvg", params.A, basis.evaluate(np.asarray(t, dtype=float)))


def intensity(params: ModelParams, basis: BasisConfig, seq: EventSequence, u: int,
              t: float) -> float:
    """``lambda_u(t)`` given the history strictly before ``t``."""
    if not 0 <= t <= seq.horizon:
        raise ValueError(f"t={t} outside [0, {seq.horizon}]")
    if not 0 <= u < params.num_types:
        raise IndexError(f"type {u} outside range({params.num_types})")
    past = seq.times < t
    lags = t - seq.times[past]
    kern = basis.evaluate(lags)
    excitation = np.einsum("jm,jm->", kern, params.A[u, seq.types[past]])
    return float(params.mu[u] + excitation)


def extract_graph(params: ModelParams, tol: float = DEFAULT_GRAPH_TOL) -> GrangerGraph:
    """Edge v -> u iff the coefficient group ``A[u, v]`` has 2-norm above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return GrangerGraph(params.group_norms() > tol)


def branching_matrix(params: ModelParams, basis: BasisConfig):
    """Integrated kernels ``int_0^inf phi_uv`` and their spectral radius."""
    _check_dims(params, params.num_types, basis)
    B = params.A @ basis.total_mass()
    radius = float(np.max(np.abs(np.linalg.eigvals(B)))) if B.size else 0.0
    return B, radius


def mean_kernel_mass(basis: BasisConfig) -> float:
    return float(np.mean(basis.total_mass()))
