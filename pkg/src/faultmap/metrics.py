"""Cluster validity for labeled embeddings."""

from __future__ import annotations

import numpy as np

from .numerics import as_feature_matrix, pairwise_sq_dists


def _groups(coords, labels):
    coords = as_feature_matrix(coords, "coords")
    labels = np.asarray(labels)
    if labels.shape != (coords.shape[0],):
        raise ValueError(f"need one label per row: {labels.shape[0]} labels for {coords.shape[0]} rows")
    uniq = np.unique(labels)
    return coords, labels, uniq


def davies_bouldin(coords, labels) -> float:
    """Davies-Bouldin index of a labeled point set (lower is better).

    Scatter ``S_i`` is the mean Euclidean distance of cluster ``i``'s points to
    its centroid, separation ``M_ij`` the Euclidean centroid distance, and the
    index averages ``max_{j != i} (S_i + S_j) / M_ij`` over clusters.

    Raises
    ------
    ValueError
        Fewer than two distinct labels, or two clusters sharing a centroid.
    """
    coords, labels, uniq = _groups(coords, labels)
    k = uniq.size
    if k < 2:
        raise ValueError(f"Davies-Bouldin needs at least 2 clusters, got {k}")
    centroids = np.stack([coords[labels == u].mean(axis=0) for u in uniq])
    scatter = np.array([np.linalg.norm(coords[labels == u] - centroids[i], axis=1).mean()
                        for i, u in enumerate(uniq)])
    # direct differences: the Gram expansion loses digits for nearby centroids
    M = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    off = ~np.eye(k, dtype=bool)
    if np.any(M[off] == 0):
        raise ValueError("two clusters have coincident centroids; the index is undefined")
    R = np.where(off, (scatter[:, None] + scatter[None, :]) / np.where(off, M, 1.0), -np.inf)
    return float(R.max(axis=1).mean())


def nearest_centroid_labels(coords, labels) -> np.ndarray:
    """Re-label each row by the nearest per-label centroid."""
    coords, labels, uniq = _groups(coords, labels)
    cent = np.stack([coords[labels == u].mean(axis=0) for u in uniq])
    return uniq[np.argmin(pairwise_sq_dists(coords, cent), axis=1)]


def label_purity(coords, labels) -> float:
    """Fraction of rows whose nearest label centroid is their own label."""
    return float(np.mean(nearest_centroid_labels(coords, labels) == np.asarray(labels)))
