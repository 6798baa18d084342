"""Distance-based drift scores for points leaving normal-operation clusters.

A baseline is learned from embedded normal data: one centroid per cluster and
a scale equal to the 95th percentile of member distances to it. A point's
drift score is its distance to the nearest centroid in units of that
cluster's scale, so 1.0 sits on the shell enclosing 95% of normal points.
What score constitutes a fault is a calibration choice left to the user;
the default alarm fires strictly above 1.0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import as_feature_matrix, kmeans

BASELINE_SCHEMA = "baseline/v1"
SCALE_PERCENTILE = 95.0
MIN_CLUSTER_SIZE = 5


@dataclass(frozen=True)
class BaselineModel:
    centroids: np.ndarray       # (k, p)
    scales: np.ndarray          # (k,)
    cluster_labels: tuple[str, ...]
    source: str                 # "labels-given" | "kmeans-discovered"
    threshold: float = 1.0

    @property
    def dims(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {"schema": BASELINE_SCHEMA, "centroids": self.centroids.tolist(),
                "scales": self.scales.tolist(), "cluster_labels": list(self.cluster_labels),
                "source": self.source, "threshold": self.threshold,
                "scale_percentile": SCALE_PERCENTILE}

    @classmethod
    def from_dict(cls, doc: dict) -> "BaselineModel":
        if doc.get("schema") != BASELINE_SCHEMA:
            raise ValueError(f"expected schema {BASELINE_SCHEMA!r}, got {doc.get('schema')!r}")
        return cls(np.asarray(doc["centroids"], float), np.asarray(doc["scales"], float),
                   tuple(doc["cluster_labels"]), doc["source"], float(doc["threshold"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "BaselineModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DriftReport:
    scores: np.ndarray
    nearest_cluster: np.ndarray   # cluster labels (str)
    alarms: np.ndarray            # bool

    def to_csv_rows(self, start: int = 0):
        for i, (s, c, a) in enumerate(zip(self.scores, self.nearest_cluster, self.alarms), start):
            yield [i, repr(float(s)), c, int(a)]


def fit_baseline(normal_coords, labels=None, k: int | None = None, seed: int = 0,
                 threshold: float = 1.0) -> BaselineModel:
    """Learn per-cluster centroids and 95th-percentile scales from normal data.

    Give either ground-truth ``labels`` (one per row) or a cluster count ``k``
    for seeded k-means discovery. With neither, the data form one cluster.
    """
    Y = as_feature_matrix(normal_coords, "normal_coords")
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if labels is not None:
        labels = np.asarray(labels).astype(str)
        if labels.shape != (Y.shape[0],):
            raise ValueError("need one label per row")
        names = tuple(np.unique(labels).tolist())
        assign = np.searchsorted(np.asarray(names), labels)
        source = "labels-given"
    else:
        k = 1 if k is None else k
        assign = kmeans(Y, k, seed=seed).assignments
        names = tuple(str(j) for j in range(k))
        source = "kmeans-discovered"
    centroids, scales = [], []
    for j, name in enumerate(names):
        members = Y[assign == j]
        if members.shape[0] < MIN_CLUSTER_SIZE:
            raise ValueError(f"cluster {name!r} has {members.shape[0]} members; "
                             f"at least {MIN_CLUSTER_SIZE} are required")
        c = members.mean(axis=0)
        scale = float(np.percentile(np.linalg.norm(members - c, axis=1), SCALE_PERCENTILE))
        if not scale > 0:
            raise ValueError(f"cluster {name!r} has zero spread")
        centroids.append(c)
        scales.append(scale)
    return BaselineModel(np.stack(centroids), np.asarray(scales), names, source, float(threshold))


def drift_score(model: BaselineModel, coords) -> DriftReport:
    """Normalized distance to the nearest normal cluster for each row of ``coords``."""
    Y = as_feature_matrix(coords, "coords")
    if Y.shape[1] != model.dims:
        raise ValueError(f"baseline has {model.dims} dimensions, got {Y.shape[1]}")
    dist = np.linalg.norm(Y[:, None, :] - model.centroids[None, :, :], axis=2)
    ratio = dist / model.scales
    nearest = np.argmin(ratio, axis=1)
    scores = ratio[np.arange(Y.shape[0]), nearest]
    names = np.asarray(model.cluster_labels, dtype=object)
    return DriftReport(scores, names[nearest], scores > model.threshold)
