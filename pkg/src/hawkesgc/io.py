"""File formats. Event types are 1-based in every file.

* datasets: JSON Lines, one ``{"T": horizon, "events": [[t, u], ...]}`` per line
* models: ``{"U", "M", "mu", "A", "basis": {"omega0", "sigma", "centers", "horizon"}}``
* clusters: ``[[1, 2, 3], [4, 5]]``
* ground truth: :meth:`GroundTruth.to_dict` plus the true adjacency
"""

from __future__ import annotations

import json
from pathlib import Path

from .basis import BasisConfig
from .model import ClusterStructure, Dataset, EventSequence, ModelParams
from .simulate import GroundTruth


def sequence_to_dict(seq: EventSequence) -> dict:
    return {"T": seq.horizon,
            "events": [[float(t), int(u) + 1] for t, u in zip(seq.times, seq.types)]}


def write_dataset(data: Dataset, path) -> None:
    with open(path, "w") as fh:
        for seq in data.sequences:
            fh.write(json.dumps(sequence_to_dict(seq)) + "\n")


def read_dataset(path, num_types: int | None = None) -> Dataset:
    """Load a JSONL dataset; ``num_types`` defaults to the largest type seen."""
    seqs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                seqs.append(EventSequence.from_pairs(rec["events"], rec["T"], one_based=True))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad sequence record: {exc}") from exc
    if not seqs:
        raise ValueError(f"{path}: no sequences")
    seen = max((int(s.types.max()) + 1 for s in seqs if len(s)), default=1)
    if num_types is None:
        num_types = seen
    elif seen > num_types:
        raise ValueError(f"{path}: type {seen} exceeds U={num_types}")
    return Dataset(tuple(seqs), num_types)


def model_to_dict(params: ModelParams, basis: BasisConfig) -> dict:
    return {"U": params.num_types, "M": params.num_basis, "mu": params.mu.tolist(),
            "A": params.A.tolist(), "basis": basis.to_dict()}


def model_from_dict(d: dict) -> tuple[ModelParams, BasisConfig]:
    params = ModelParams(d["mu"], d["A"])
    basis = BasisConfig.from_dict(d["basis"])
    if params.num_types != d.get("U", params.num_types) or params.num_basis != basis.M:
        raise ValueError("model file dimensions are inconsistent")
    return params, basis


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_model(params: ModelParams, basis: BasisConfig, path) -> None:
    write_json(model_to_dict(params, basis), path)


def read_model(path) -> tuple[ModelParams, BasisConfig]:
    return model_from_dict(read_json(path))


def read_basis(path) -> BasisConfig:
    return BasisConfig.from_dict(read_json(path))


def read_clusters(path, num_types: int) -> ClusterStructure:
    raw = read_json(path)
    if isinstance(raw, dict):
        raw = raw["clusters"]
    return clusters_from_lists(raw, num_types)


def clusters_from_lists(groups, num_types: int) -> ClusterStructure:
    return ClusterStructure(tuple(tuple(int(u) - 1 for u in g) for g in groups), num_types)


def write_truth(gt: GroundTruth, path) -> None:
    write_json(gt.to_dict(), path)


def read_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(read_json(path))

