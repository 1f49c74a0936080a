"""Domain types: event sequences, datasets, parameters, clusters and graphs.

Event types are 0-based everywhere in the Python API. The JSON file formats
(see :mod:`hawkesgc.io`) use 1-based types.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class EventSequence:
    """One realisation: sorted event times, their types, and the horizon.

    Simultaneous events are ordered by type index. Two events of the same
    type at the same time are rejected.
    """

    times: np.ndarray
    types: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        types = np.asarray(self.types, dtype=np.int64).reshape(-1)
        if times.shape != types.shape:
            raise ValueError("times and types must have the same length")
        horizon = float(self.horizon)
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise ValueError("event times must be finite")
            if times.min() < 0 or times.max() > horizon:
                raise ValueError("event times must lie in [0, horizon]")
            if types.min() < 0:
                raise ValueError("event types must be nonnegative")
            order = np.lexsort((types, times))
            times, types = times[order], types[order]
            same = (np.diff(times) == 0) & (np.diff(types) == 0)
            if same.any():
                raise ValueError("two events of the same type share a timestamp")
        times.setflags(write=False)
        types.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "horizon", horizon)

    @classmethod
    def from_pairs(cls, events: Iterable[Sequence[float]], horizon: float,
                   one_based: bool = False) -> "EventSequence":
        pairs = [(float(t), int(u)) for t, u in events]
        times = np.array([t for t, _ in pairs], dtype=np.float64)
        types = np.array([u for _, u in pairs], dtype=np.int64)
        if one_based:
            if types.size and types.min() < 1:
                raise ValueError("1-based event types must be >= 1")
            types = types - 1
        return cls(times, types, horizon)

    def __len__(self):
        return int(self.times.size)


@dataclass(frozen=True)
class Dataset:
    sequences: tuple
    num_types: int

    def __post_init__(self):
        seqs = tuple(self.sequences)
        if self.num_types < 1:
            raise ValueError("num_types must be >= 1")
        for s in seqs:
            if len(s) and int(s.types.max()) >= self.num_types:
                raise ValueError("sequence contains a type outside range(num_types)")
        object.__setattr__(self, "sequences", seqs)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Dataset(self.sequences[idx], self.num_types)
        return self.sequences[idx]

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.sequences[i] for i in indices), self.num_types)

    @property
    def total_events(self) -> int:
        return sum(len(s) for s in self.sequences)

    @property
    def total_time(self) -> float:
        return float(sum(s.horizon for s in self.sequences))

    @property
    def max_horizon(self) -> float:
        return max(s.horizon for s in self.sequences)

    def type_counts(self) -> np.ndarray:
        counts = np.zeros(self.num_types, dtype=np.int64)
        for s in self.sequences:
            counts += np.bincount(s.types, minlength=self.num_types)
        return counts


@dataclass(frozen=True)
class ModelParams:
    """Base rates ``mu`` (U,) and basis coefficients ``A`` (U, U, M).

    ``A[u, v, m]`` is the weight of basis m in the impact of type-v events
    on the intensity of type u.
    """

    mu: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        A = np.array(self.A, dtype=np.float64)
        if A.ndim != 3 or A.shape[0] != A.shape[1] or A.shape[0] != mu.size:
            raise ValueError(f"A must have shape (U, U, M) with U={mu.size}, got {A.shape}")
        if np.any(mu < 0) or np.any(A < 0):
            raise ValueError("parameters must be nonnegative")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(A))):
            raise ValueError("parameters must be finite")
        mu.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "A", A)

    @property
    def num_types(self) -> int:
        return int(self.mu.size)

    @property
    def num_basis(self) -> int:
        return int(self.A.shape[2])

    @classmethod
    def zeros(cls, num_types: int, num_basis: int) -> "ModelParams":
        return cls(np.zeros(num_types), np.zeros((num_types, num_types, num_basis)))

    def group_norms(self) -> np.ndarray:
        return np.linalg.norm(self.A, axis=2)


@dataclass(frozen=True)
class ClusterStructure:
    """Partition of the event types; ``peers(u)`` is u's cluster minus u."""

    clusters: tuple
    num_types: int
    _label: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clusters = tuple(tuple(sorted(int(u) for u in c)) for c in self.clusters)
        label = np.full(self.num_types, -1, dtype=np.int64)
        for k, c in enumerate(clusters):
            if not c:
                raise ValueError("clusters must be nonempty")
            for u in c:
                if not 0 <= u < self.num_types:
                    raise ValueError(f"type {u} outside range({self.num_types})")
                if label[u] >= 0:
                    raise ValueError(f"type {u} appears in more than one cluster")
                label[u] = k
        if np.any(label < 0):
            missing = np.flatnonzero(label < 0).tolist()
            raise ValueError(f"clusters do not cover types {missing}")
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "_label", label)

    @classmethod
    def singletons(cls, num_types: int) -> "ClusterStructure":
        return cls(tuple((u,) for u in range(num_types)), num_types)

    def peers(self, u: int) -> tuple:
        return tuple(v for v in self.clusters[self._label[u]] if v != u)

    def membership(self) -> np.ndarray:
        """(U, U) 0/1 matrix with entry (u, v) = 1 iff v is a peer of u."""
        same = self._label[:, None] == self._label[None, :]
        np.fill_diagonal(same, False)
        return same.astype(np.float64)

    def peer_counts(self) -> np.ndarray:
        return self.membership().sum(axis=1)


@dataclass(frozen=True)
class GrangerGraph:
    """Boolean adjacency; ``adjacency[u, v]`` means an edge v -> u."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def num_types(self) -> int:
        return int(self.adjacency.shape[0])

    def has_edge(self, source: int, target: int) -> bool:
        return bool(self.adjacency[target, source])

    def edges(self) -> list:
        """List of (source, target) pairs."""
        return [(int(v), int(u)) for u, v in zip(*np.nonzero(self.adjacency))]

    def absent_edges(self) -> list:
        return [(int(v), int(u)) for u, v in zip(*np.nonzero(~self.adjacency))]
