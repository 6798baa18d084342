"""Dense-matrix primitives shared by the embedding, kernel and detection code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError

JACOBI_MAX_SWEEPS = 100
KMEANS_MAX_ITER = 300


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Validate ``X`` as an n x d finite float matrix and return it as float64.

    One-dimensional input is read as a single column.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return X


def pairwise_sq_dists(X, Y=None) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``X`` (and ``Y``).

    Uses the Gram expansion; negatives produced by cancellation are clamped
    to zero and, when ``Y`` is omitted, the diagonal is exactly zero and the
    result exactly symmetric.
    """
    X = as_feature_matrix(X)
    same = Y is None
    Y = X if same else as_feature_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]} columns")
    xx = np.einsum("ij,ij->i", X, X)
    yy = xx if same else np.einsum("ij,ij->i", Y, Y)
    D = xx[:, None] + yy[None, :] - 2.0 * (X @ Y.T)
    np.maximum(D, 0.0, out=D)
    if same:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray   # (k,), non-increasing
    vectors: np.ndarray  # (n, k), orthonormal columns


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _offdiag_norm(A: np.ndarray) -> float:
    return float(np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2)))


def _jacobi_eigh(A: np.ndarray, max_sweeps: int):
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = max(float(np.sqrt(np.sum(A * A))), np.finfo(float).tiny)
    tol = 4.0 * np.finfo(float).eps * max(n, 1) * scale
    for _ in range(max_sweeps):
        if _offdiag_norm(A) <= tol:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    if _offdiag_norm(A) <= tol:
        return np.diag(A).copy(), V
    raise ConvergenceError(f"Jacobi eigensolver did not converge within {max_sweeps} sweeps")


def sym_eigen(A, k: int | None = None, method: str = "lapack",
              max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenResult:
    """Top-``k`` eigenpairs of a real symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix; asymmetry above 1e-8 (relative to the largest
        entry) is rejected.
    k : int, optional
        Number of leading eigenpairs; all ``n`` by default.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls the LAPACK symmetric driver and is the one used by
        the kernel code. ``"jacobi"`` runs cyclic Jacobi rotations, which is
        quadratic per rotation sweep in pure Python and only sensible for
        small matrices.
    max_sweeps : int
        Sweep budget for the Jacobi method.

    Returns
    -------
    EigenResult
        Eigenvalues sorted descending; each eigenvector's largest-magnitude
        entry is positive.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains NaN or infinite values")
    asym = np.max(np.abs(A - A.T)) if n else 0.0
    if asym > 1e-8 * max(1.0, np.max(np.abs(A))):
        raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    A = 0.5 * (A + A.T)
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise ValueError(f"component count k={k} must satisfy 1 <= k <= {n}")

    if method == "lapack":
        w, V = scipy.linalg.eigh(A, subset_by_index=[n - k, n - 1])
    elif method == "jacobi":
        w, V = _jacobi_eigh(A, max_sweeps)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    order = np.argsort(-w, kind="stable")[:k]
    return EigenResult(values=w[order], vectors=_fix_signs(V[:, order]))


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray     # (k, d)
    assignments: np.ndarray   # (n,) ints in [0, k)
    inertia: float
    n_iter: int
    inertia_history: tuple[float, ...]  # after each Lloyd update


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1), out=d2)
    return X[chosen].copy()


def _assign(X, centroids):
    k = centroids.shape[0]
    D = pairwise_sq_dists(X, centroids)
    labels = np.argmin(D, axis=1)
    d2 = D[np.arange(X.shape[0]), labels]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        # empty cluster takes the point farthest from its centroid (from a cluster that can spare it)
        order = np.argsort(-d2, kind="stable")
        far = next(int(i) for i in order if counts[labels[i]] > 1)
        counts[labels[far]] -= 1
        counts[j] += 1
        labels[far] = j
        d2[far] = 0.0
    return labels


def _inertia(X, centroids, labels) -> float:
    return float(np.sum((X - centroids[labels]) ** 2))


def kmeans(X, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding.

    Deterministic for a given ``seed``. After every assignment step a cluster
    left empty is repaired by moving into it the point farthest from its own
    centroid, so every returned cluster has at least one member.
    """
    X = as_feature_matrix(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cluster count k={k} must satisfy 1 <= k <= n={n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    labels = _assign(X, centroids)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
        history.append(_inertia(X, centroids, labels))
        new_labels = _assign(X, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return KMeansResult(centroids, labels, _inertia(X, centroids, labels), n_iter, tuple(history))


@dataclass(frozen=True)
class Standardizer:
    """Per-column location and scale learned from training data."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask of zero-variance columns, centred only

    def transform(self, X) -> np.ndarray:
        X = as_feature_matrix(X)
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} columns, got {X.shape[1]}")
        return (X - self.mean) / self.std

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float),
                   np.asarray(d["constant"], bool))

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d), np.zeros(d, bool))


def standardize(X) -> tuple[np.ndarray, Standardizer]:
    """Centre every column and scale it to unit (population) standard deviation.

    Zero-variance columns are centred only; they are flagged in
    ``Standardizer.constant`` and their stored scale is 1.
    """
    X = as_feature_matrix(X)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    std = np.where(constant, 1.0, std)
    stats = Standardizer(mean, std, constant)
    return stats.transform(X), stats
