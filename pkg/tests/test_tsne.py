import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import entropy

from faultmap.exceptions import ConvergenceError
from faultmap.metrics import label_purity
from faultmap.numerics import pairwise_sq_dists
from faultmap.tsne import (TsneConfig, calibrate_sigmas, kl_divergence, kl_gradient, low_dim_affinities,
                           symmetrize, tsne_fit)
from synth import blobs, rpm_blobs


def row_perplexities(P):
    return np.array([np.exp(entropy(row[row > 0])) for row in P])


def perplexity_at(d, beta):
    p = np.exp(-beta * (d - d.min()))
    return np.exp(entropy(p / p.sum()))


class TestCalibration:
    def test_equidistant_uniform(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        _, P = calibrate_sigmas(pairwise_sq_dists(X), 1.7)
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_allclose(P[off], 0.5, atol=1e-12)
        np.testing.assert_array_equal(np.diag(P), 0.0)

    def test_grid_search_oracle(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        D = pairwise_sq_dists(X)
        sigma, P = calibrate_sigmas(D, 5.0)
        assert np.all(np.abs(row_perplexities(P) - 5.0) <= 1e-3)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        grid = np.logspace(-4, 3, 70001)
        for i in range(10):
            d = np.delete(D[i], i)
            perp = np.array([perplexity_at(d, b) for b in grid[::50]])
            j = np.argmin(np.abs(perp - 5.0)) * 50
            fine = grid[max(0, j - 50):j + 51]
            b_grid = fine[np.argmin([abs(perplexity_at(d, b) - 5.0) for b in fine])]
            b_ours = 1.0 / (2.0 * sigma[i] ** 2)
            assert b_ours == pytest.approx(b_grid, rel=5e-3)

    def test_two_tight_pairs(self):
        X = np.array([[0.0, 0.0], [0.01, 0.0], [10.0, 0.0], [10.01, 0.0]])
        D = pairwise_sq_dists(X)
        _, P = calibrate_sigmas(D, 1.5)
        # independent solve of the bandwidth for point 0, then direct evaluation
        d = D[0, 1:]
        beta = brentq(lambda b: perplexity_at(d, b) - 1.5, 1e-6, 10.0)
        p = np.exp(-beta * (d - d.min()))
        p /= p.sum()
        np.testing.assert_allclose(P[0, 1:], p, atol=2e-3)
        assert P[0, 1] == pytest.approx(0.896, abs=2e-3)
        for i, partner in [(0, 1), (1, 0), (2, 3), (3, 2)]:
            assert P[i, partner] == P[i].max() > 0.85

    @pytest.mark.parametrize("perp", [1.0, 10.0])
    def test_perplexity_range(self, perp):
        with pytest.raises(ValueError):
            calibrate_sigmas(np.ones((10, 10)) - np.eye(10), perp)

    def test_bracket_failure_names_row(self):
        # row 0 sees three coincident neighbours: its perplexity cannot drop below 3
        X = np.array([[0.0], [1.0], [1.0], [1.0], [2.0]])
        with pytest.raises(ConvergenceError, match="row 0"):
            calibrate_sigmas(pairwise_sq_dists(X), 2.5)


class TestAffinities:
    def test_symmetric_input(self):
        P = np.full((4, 4), 1 / 3)
        np.fill_diagonal(P, 0)
        J = symmetrize(P)
        np.testing.assert_allclose(J, P / 4, atol=1e-15)
        assert J.sum() == pytest.approx(1.0, abs=1e-10)

    def test_definition(self):
        rng = np.random.default_rng(1)
        P = rng.uniform(size=(4, 4))
        np.fill_diagonal(P, 0)
        P /= P.sum(axis=1, keepdims=True)
        J = symmetrize(P)
        np.testing.assert_allclose(J, (P + P.T) / 8, atol=1e-15, rtol=0)
        assert J.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.array_equal(J, J.T)

    def test_two_points(self):
        Q, _ = low_dim_affinities([[0.0, 0.0], [1.0, 0.0]])
        assert Q[0, 1] == Q[1, 0] == 0.5

    def test_equilateral(self):
        Q, _ = low_dim_affinities([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_allclose(Q[off], 1 / 6, atol=1e-15)

    def test_student_t_loop_oracle(self):
        Y = np.random.default_rng(2).normal(size=(6, 2))
        num = np.zeros((6, 6))
        for i in range(6):
            for j in range(6):
                if i != j:
                    num[i, j] = 1.0 / (1.0 + (Y[i, 0] - Y[j, 0]) ** 2 + (Y[i, 1] - Y[j, 1]) ** 2)
        Q, _ = low_dim_affinities(Y)
        np.testing.assert_allclose(Q, num / num.sum(), atol=1e-12, rtol=0)


class TestKL:
    def test_identity(self):
        Q, _ = low_dim_affinities(np.random.default_rng(3).normal(size=(5, 2)))
        assert kl_divergence(Q, Q) == 0.0

    def test_uniform(self):
        U = np.full((4, 4), 1 / 12)
        np.fill_diagonal(U, 0)
        assert kl_divergence(U, U) == 0.0

    def test_loop_oracle(self):
        P = np.array([[0, 0.2, 0.1], [0.2, 0, 0.2], [0.1, 0.2, 0]])
        Q = np.array([[0, 0.1, 0.25], [0.1, 0, 0.15], [0.25, 0.15, 0]])
        total = 0.0
        for i in range(3):
            for j in range(3):
                if i != j:
                    total += P[i, j] * np.log(P[i, j] / Q[i, j])
        assert kl_divergence(P, Q) == pytest.approx(total, abs=1e-12)
        assert kl_divergence(P, Q) >= 0

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(8, 4))
        from faultmap.tsne import joint_affinities
        P = joint_affinities(X, 3.0)
        Y = rng.normal(size=(8, 2))
        g = kl_gradient(P, Y)
        h = 1e-5
        fd = np.zeros_like(Y)
        for idx in np.ndindex(*Y.shape):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[idx] += h
            Ym[idx] -= h
            fd[idx] = (kl_divergence(P, low_dim_affinities(Yp)[0])
                       - kl_divergence(P, low_dim_affinities(Ym)[0])) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


class TestFit:
    def test_two_blobs_separable(self):
        X, y = blobs(20, 5, 2, seed=0, sep=5.0)
        emb = tsne_fit(X, TsneConfig(perplexity=5, seed=1))
        assert label_purity(emb.coords, y) == 1.0
        assert emb.coords.shape == (20, 2)
        assert np.all(np.isfinite(emb.coords)) and emb.final_kl >= 0

    def test_three_rpm_groups(self):
        X, y = rpm_blobs(90, 13, seed=2)
        emb = tsne_fit(X, TsneConfig(perplexity=10, seed=2))
        assert label_purity(emb.coords, y) == 1.0

    def test_descent_and_centering(self):
        X, _ = blobs(60, 6, 3, seed=5)
        emb = tsne_fit(X, TsneConfig(perplexity=10, seed=0, max_iter=500))
        assert emb.final_kl < emb.kl_history[100]
        np.testing.assert_allclose(emb.coords.mean(axis=0), 0, atol=1e-10)
        assert emb.iterations_run == 500

    def test_deterministic(self):
        X, _ = blobs(30, 4, 2, seed=6)
        cfg = TsneConfig(perplexity=5, seed=42, max_iter=300)
        a, b = tsne_fit(X, cfg), tsne_fit(X, cfg)
        assert np.array_equal(a.coords, b.coords)

    def test_duplicate_rows(self):
        X, _ = blobs(20, 3, 2, seed=7)
        X = np.vstack([X, X[:5]])
        emb = tsne_fit(X, TsneConfig(perplexity=5, max_iter=300))
        assert np.all(np.isfinite(emb.coords))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TsneConfig(out_dims=4)
        with pytest.raises(ValueError):
            TsneConfig(perplexity=1.0)
        with pytest.raises(ValueError, match="smaller than n"):
            tsne_fit(np.random.default_rng(0).normal(size=(10, 2)), TsneConfig(perplexity=10))

    def test_divergence_reported(self):
        X, _ = blobs(20, 3, 2, seed=8)
        with pytest.raises(ConvergenceError, match="iteration"):
            tsne_fit(X, TsneConfig(perplexity=5, learning_rate=1e300, max_iter=50))
