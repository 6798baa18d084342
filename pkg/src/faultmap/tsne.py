"""Exact (O(n^2)) t-SNE with per-point perplexity calibration."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError
from .numerics import as_feature_matrix, pairwise_sq_dists

log = logging.getLogger(__name__)

AFFINITY_FLOOR = 1e-12
PERPLEXITY_TOL = 1e-3
MAX_BRACKET_DOUBLINGS = 50


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    learning_rate: float = 100.0
    out_dims: int = 2
    max_iter: int = 1000
    seed: int = 0
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    init_std: float = 1e-4

    def __post_init__(self):
        if not self.perplexity > 1:
            raise ValueError(f"perplexity must exceed 1, got {self.perplexity}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.out_dims not in (2, 3):
            raise ValueError(f"out_dims must be 2 or 3, got {self.out_dims}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    def check_n(self, n: int) -> None:
        if n < 4:
            raise ValueError(f"t-SNE needs at least 4 observations, got {n}")
        if not self.perplexity < n:
            raise ValueError(f"perplexity {self.perplexity} must be smaller than n={n}")


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray        # (n, out_dims)
    final_kl: float
    iterations_run: int
    kl_history: np.ndarray    # KL(P || Q) with the unexaggerated P, one entry per iteration


def _row_entropy(d: np.ndarray, beta: float):
    # d: squared distances to the other points, shifted so min(d) == 0
    p = np.exp(-beta * d)
    z = p.sum()
    h = np.log(z) + beta * np.dot(d, p) / z
    return h, p / z


def calibrate_sigmas(D, perplexity: float, tol: float = PERPLEXITY_TOL):
    """Find per-row Gaussian precisions that hit the target perplexity.

    Bisection on ``beta_i = 1 / (2 sigma_i^2)`` until ``|exp(H_i) - perplexity|``
    is within ``tol``; ``H_i`` is the natural-log entropy, so ``exp(H_i)``
    equals ``2`` to the entropy in bits.

    Returns
    -------
    sigma : ndarray, shape (n,)
    P : ndarray, shape (n, n)
        Row-conditional affinities with zero diagonal; each row sums to 1.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if not 1 < perplexity < n:
        raise ValueError(f"perplexity must satisfy 1 < perplexity < n={n}, got {perplexity}")
    target = np.log(perplexity)
    P = np.zeros((n, n))
    beta = np.empty(n)
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = D[i, mask[i]]
        d = row - row.min()
        if d.max() <= 1e-12 * row.max():
            # all neighbours equidistant: the row is uniform for every bandwidth
            P[i, mask[i]] = 1.0 / (n - 1)
            beta[i] = np.inf
            continue
        spread = d.mean()
        b = 1.0 / spread if spread > 0 else 1.0
        h, p = _row_entropy(d, b)
        lo, hi = 0.0, np.inf
        # bracket: entropy decreases monotonically in beta
        doublings = 0
        while h < target and doublings <= MAX_BRACKET_DOUBLINGS:
            hi = b
            b /= 2.0
            h, p = _row_entropy(d, b)
            doublings += 1
        while h > target and np.isinf(hi) and doublings <= MAX_BRACKET_DOUBLINGS:
            lo = b
            b *= 2.0
            h, p = _row_entropy(d, b)
            doublings += 1
        if h > target:
            lo = b
        else:
            hi = b
        if doublings > MAX_BRACKET_DOUBLINGS or np.isinf(hi):
            raise ConvergenceError(
                f"row {i}: could not bracket the precision for perplexity {perplexity} within "
                f"{MAX_BRACKET_DOUBLINGS} doublings (duplicate points?)")
        for _ in range(200):
            if abs(np.exp(h) - perplexity) <= tol:
                break
            b = 0.5 * (lo + hi)
            h, p = _row_entropy(d, b)
            if h > target:
                lo = b
            else:
                hi = b
        else:
            raise ConvergenceError(f"row {i}: perplexity bisection did not converge")
        P[i, mask[i]] = p
        beta[i] = b
    with np.errstate(divide="ignore"):
        return np.sqrt(1.0 / (2.0 * beta)), P


def symmetrize(P) -> np.ndarray:
    """Joint affinities ``(P + P^T) / (2n)``, off-diagonal entries floored at 1e-12."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    J = (P + P.T) / (2.0 * n)
    J = np.maximum(J, AFFINITY_FLOOR)
    np.fill_diagonal(J, 0.0)
    return J


def low_dim_affinities(Y):
    """Student-t (one degree of freedom) joint affinities of embedding ``Y``.

    Returns ``(Q, num)`` where ``num[i, j] = 1 / (1 + |y_i - y_j|^2)`` with a
    zero diagonal, kept for the gradient.
    """
    Y = np.asarray(Y, dtype=float)
    num = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    return Q, num


def kl_divergence(P, Q) -> float:
    """``sum_{i != j} p_ij log(p_ij / q_ij)``; both arguments floored at 1e-12."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    off = ~np.eye(P.shape[0], dtype=bool)
    p = np.maximum(P[off], AFFINITY_FLOOR)
    q = np.maximum(Q[off], AFFINITY_FLOOR)
    return float(np.sum(p * np.log(p / q)))


def kl_gradient(P, Y) -> np.ndarray:
    """Gradient of ``KL(P || Q(Y))`` w.r.t. the embedding coordinates."""
    Y = np.asarray(Y, dtype=float)
    Q, num = low_dim_affinities(Y)
    W = (P - Q) * num
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def _jitter_duplicates(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    _, first = np.unique(X, axis=0, return_index=True)
    dup = np.ones(X.shape[0], dtype=bool)
    dup[first] = False
    if not dup.any():
        return X
    X = X.copy()
    X[dup] += 1e-10 * rng.standard_normal((int(dup.sum()), X.shape[1]))
    return X


def joint_affinities(X, perplexity: float, seed: int = 0) -> np.ndarray:
    X = as_feature_matrix(X)
    X = _jitter_duplicates(X, np.random.default_rng([seed, 1]))
    _, P = calibrate_sigmas(pairwise_sq_dists(X), perplexity)
    return symmetrize(P)


def tsne_fit(X, cfg: TsneConfig | None = None) -> Embedding:
    """Embed the rows of ``X`` by gradient descent on KL(P || Q).

    Plain momentum descent (no per-parameter gains) with early exaggeration
    of P; the embedding is re-centred to zero mean after every step.
    Deterministic for a given ``cfg.seed``.
    """
    cfg = cfg or TsneConfig()
    X = as_feature_matrix(X)
    n = X.shape[0]
    cfg.check_n(n)
    P = joint_affinities(X, cfg.perplexity, cfg.seed)

    rng = np.random.default_rng(cfg.seed)
    Y = cfg.init_std * rng.standard_normal((n, cfg.out_dims))
    velocity = np.zeros_like(Y)
    kl = np.empty(cfg.max_iter)
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(cfg.max_iter):
            exaggerate = cfg.early_exaggeration_factor if it < cfg.early_exaggeration_iters else 1.0
            momentum = cfg.momentum_initial if it < cfg.momentum_switch_iter else cfg.momentum_final
            Q, num = low_dim_affinities(Y)
            kl[it] = kl_divergence(P, Q)
            W = (exaggerate * P - Q) * num
            grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
            velocity = momentum * velocity - cfg.learning_rate * grad
            Y = Y + velocity
            Y -= Y.mean(axis=0)
            if not np.all(np.isfinite(Y)):
                raise ConvergenceError(f"t-SNE coordinates became non-finite at iteration {it}")
            if it % 100 == 0:
                log.debug("iteration %d: KL %.5f", it, kl[it])
    Q, _ = low_dim_affinities(Y)
    final = kl_divergence(P, Q)
    return Embedding(Y, final, cfg.max_iter, kl)
