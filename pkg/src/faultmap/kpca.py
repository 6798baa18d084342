"""Kernel PCA: exact and Nystrom-approximated fits, and out-of-sample scoring.

A fitted :class:`KpcaModel` holds everything needed to score new rows, so a
model trained on normal-condition data can be shipped and used to place new
observations on the same 2-d map.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Standardizer, as_feature_matrix, kmeans, pairwise_sq_dists, standardize, sym_eigen

log = logging.getLogger(__name__)

MODEL_SCHEMA = "kpca-model/v1"
EIGEN_DROP_RATIO = 1e-10
MEDIAN_GAMMA_MAX_ROWS = 500


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None  # rbf only; None means "median heuristic at fit time"

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"rbf gamma must be positive, got {self.gamma}")


def kernel_matrix(A, B, spec: KernelSpec) -> np.ndarray:
    A = as_feature_matrix(A, "A")
    B = as_feature_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    if spec.kind == "linear":
        return A @ B.T
    if spec.gamma is None:
        raise ValueError("rbf kernel needs a resolved gamma")
    if A is B:
        D = pairwise_sq_dists(A)
    else:
        D = pairwise_sq_dists(A, B)
    return np.exp(-spec.gamma * D)


def _kernel_row(x: np.ndarray, R: np.ndarray, spec: KernelSpec) -> np.ndarray:
    # one test row against the reference set; arithmetic independent of batch size
    if spec.kind == "linear":
        return R @ x
    diff = R - x
    return np.exp(-spec.gamma * np.einsum("ij,ij->i", diff, diff))


def median_gamma(X, max_rows: int | None = None, seed: int = 0) -> float:
    """``1 / (2 * median)`` of the nonzero pairwise squared distances.

    With ``max_rows`` set and more rows than that, the median is taken over a
    seeded random subset of rows so memory stays bounded.
    """
    X = as_feature_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("median_gamma needs at least 2 rows")
    if max_rows is not None and X.shape[0] > max_rows:
        idx = np.sort(np.random.default_rng([seed, 2]).choice(X.shape[0], max_rows, replace=False))
        X = X[idx]
    D = pairwise_sq_dists(X)
    d = D[np.triu_indices_from(D, k=1)]
    d = d[d > 0]
    if d.size == 0:
        raise ValueError("all pairwise distances are zero; cannot choose a bandwidth")
    return float(1.0 / (2.0 * np.median(d)))


@dataclass
class KpcaModel:
    kernel: KernelSpec
    mode: str                      # "exact" | "nystrom"
    reference_points: np.ndarray   # (m, d) standardized training rows or landmarks
    ref_col_means: np.ndarray      # (m,) mean over training rows of k(x_i, r_j)
    grand_mean: float              # mean of the training Gram (exact mode)
    components: np.ndarray         # (m, k) projection coefficients
    eigenvalues: np.ndarray        # (k,) descending, positive
    feature_stats: Standardizer
    ridge: float = 0.0             # added to the landmark Gram (nystrom)
    n_train: int = 0
    feature_names: tuple[str, ...] | None = None
    train_scores: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.reference_points.shape[1]

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def project(self, X) -> np.ndarray:
        return kpca_project(self, X)

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma},
            "mode": self.mode,
            "reference_points": self.reference_points.tolist(),
            "centering": {"ref_col_means": self.ref_col_means.tolist(),
                          "grand_mean": self.grand_mean},
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "feature_stats": self.feature_stats.to_dict(),
            "ridge": self.ridge,
            "n_train": self.n_train,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KpcaModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise ValueError(f"expected schema {MODEL_SCHEMA!r}, got {doc.get('schema')!r}")
        k = doc["kernel"]
        d = len(doc["feature_stats"]["mean"])
        return cls(
            kernel=KernelSpec(k["kind"], k["gamma"]),
            mode=doc["mode"],
            reference_points=np.asarray(doc["reference_points"], float).reshape(-1, d),
            ref_col_means=np.asarray(doc["centering"]["ref_col_means"], float),
            grand_mean=float(doc["centering"]["grand_mean"]),
            components=np.asarray(doc["components"], float).reshape(len(doc["centering"]["ref_col_means"]), -1),
            eigenvalues=np.asarray(doc["eigenvalues"], float),
            feature_stats=Standardizer.from_dict(doc["feature_stats"]),
            ridge=float(doc.get("ridge", 0.0)),
            n_train=int(doc.get("n_train", 0)),
            feature_names=None if doc.get("feature_names") is None else tuple(doc["feature_names"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "KpcaModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _prepare(X, spec: KernelSpec, standardize_features: bool, seed: int):
    X = as_feature_matrix(X)
    if standardize_features:
        Z, stats = standardize(X)
    else:
        Z, stats = X.copy(), Standardizer.identity(X.shape[1])
    if spec.kind == "rbf" and spec.gamma is None:
        spec = KernelSpec("rbf", median_gamma(Z, MEDIAN_GAMMA_MAX_ROWS, seed))
    return Z, stats, spec


def _keep_positive(values: np.ndarray, vectors: np.ndarray, k: int):
    keep = values > EIGEN_DROP_RATIO * max(values[0], 0.0)
    if not keep.all():
        log.warning("kernel PCA: %d of %d requested components have non-positive "
                    "eigenvalues and were dropped", int((~keep).sum()), k)
    if not keep.any():
        raise ValueError("no positive eigenvalues; the centred kernel matrix is zero")
    return values[keep], vectors[:, keep]


def center_gram(K: np.ndarray) -> np.ndarray:
    """Double centring ``K - 1K/n - K1/n + 1K1/n^2``."""
    col = K.mean(axis=0)
    row = K.mean(axis=1)
    return K - col[None, :] - row[:, None] + K.mean()


def kpca_fit_exact(X, k: int = 2, spec: KernelSpec | None = None,
                   standardize_features: bool = True, seed: int = 0) -> KpcaModel:
    """Kernel PCA from the eigendecomposition of the full centred Gram matrix.

    Coefficient column ``j`` is the ``j``-th eigenvector divided by the square
    root of its eigenvalue, so training scores are ``sqrt(lambda_j) v_j``
    (the PCA convention; with a linear kernel the scores equal ordinary PCA
    scores up to sign).
    """
    spec = spec or KernelSpec()
    Z, stats, spec = _prepare(X, spec, standardize_features, seed)
    n = Z.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"component count k={k} must satisfy 1 <= k <= n={n}")
    K = kernel_matrix(Z, Z, spec)
    col_means = K.mean(axis=0)
    grand = float(K.mean())
    Kc = center_gram(K)
    eig = sym_eigen(Kc, k)
    values, vectors = _keep_positive(eig.values, eig.vectors, k)
    alphas = vectors / np.sqrt(values)
    model = KpcaModel(spec, "exact", Z, col_means, grand, alphas, values, stats, n_train=n)
    model.train_scores = Kc @ alphas
    return model


def kpca_fit_nystrom(X, c: int = 100, k: int = 2, spec: KernelSpec | None = None,
                     seed: int = 0, landmarks=None,
                     standardize_features: bool = True) -> KpcaModel:
    """Kernel PCA on a Nystrom feature map built from ``c`` landmarks.

    Landmarks are the k-means centroids (seeded) of the standardized data,
    unless ``landmarks`` are given explicitly (in raw feature units).

    With ``W`` the c x c landmark Gram and ``C`` the n x c cross Gram, each
    row gets the explicit feature ``phi(x) = W^{-1/2} k(x, L)``. Centring in
    that space subtracts the training mean of ``C`` column-wise; the principal
    axes are eigenvectors of the c x c matrix ``F^T F`` with
    ``F = (C - 1 mean(C)) W^{-1/2}``. ``F F^T`` is the double-centred
    ``C W^{-1} C^T``, so with all training points as landmarks the scores
    coincide with the exact fit. No n x n array is formed; the dominant cost
    is forming ``F^T F`` in O(n c^2).
    """
    spec = spec or KernelSpec()
    Z, stats, spec = _prepare(X, spec, standardize_features, seed)
    n = Z.shape[0]
    if landmarks is None:
        if not 1 <= c <= n:
            raise ValueError(f"landmark count c={c} must satisfy 1 <= c <= n={n}")
        L = kmeans(Z, c, seed=seed).centroids
    else:
        L = stats.transform(landmarks)
        c = L.shape[0]
    if not 1 <= k <= c:
        raise ValueError(f"component count k={k} must satisfy 1 <= k <= c={c}")

    W = kernel_matrix(L, L, spec)
    C = kernel_matrix(Z, L, spec)
    w_eig = sym_eigen(W)
    ridge = 0.0
    floor = 1e-10 * np.trace(W) / c
    if w_eig.values[-1] <= floor:
        ridge = floor
        log.info("Nystrom: landmark Gram is rank deficient; adding ridge %.3e", ridge)
    w_vals = w_eig.values + ridge
    W_inv_sqrt = (w_eig.vectors / np.sqrt(w_vals)) @ w_eig.vectors.T

    col_means = C.mean(axis=0)
    F = (C - col_means) @ W_inv_sqrt
    eig = sym_eigen(F.T @ F, k)
    values, vectors = _keep_positive(eig.values, eig.vectors, k)
    components = W_inv_sqrt @ vectors
    model = KpcaModel(spec, "nystrom", L, col_means, float(col_means.mean()), components,
                      values, stats, ridge=ridge, n_train=n)
    model.train_scores = F @ vectors
    return model


def kpca_project(model: KpcaModel, Xnew) -> np.ndarray:
    """Scores of new rows, centred with the training statistics.

    Each row is processed independently with identical arithmetic, so scoring
    rows one at a time is bit-for-bit equal to scoring them as a batch.
    """
    X = as_feature_matrix(Xnew)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    Z = model.feature_stats.transform(X)
    out = np.empty((Z.shape[0], model.n_components))
    for i, z in enumerate(Z):
        kr = _kernel_row(z, model.reference_points, model.kernel)
        if model.mode == "exact":
            kc = kr - model.ref_col_means - kr.mean() + model.grand_mean
        else:
            kc = kr - model.ref_col_means
        out[i] = kc @ model.components
    return out

