"""End-to-end acceptance checks; each prints one PASS/FAIL line in the summary."""

import os
import time
import tracemalloc
from pathlib import Path

import numpy as np
import pytest

import faultmap.kpca as kpca_mod
from faultmap.detect import BaselineModel, drift_score, fit_baseline
from faultmap.kpca import KernelSpec, KpcaModel, kpca_fit_exact, kpca_fit_nystrom
from faultmap.metrics import davies_bouldin, label_purity
from faultmap.numerics import pairwise_sq_dists
from faultmap.spectral import SignalTrace, frame_count, segment_curve, segmentation_sse, stft_frames
from faultmap.tsne import TsneConfig, calibrate_sigmas, kl_divergence, kl_gradient, low_dim_affinities, tsne_fit
from synth import blobs, piecewise_curve, rpm_blobs
from test_metrics import db_oracle


def entropy_bits(p):
    p = p[p > 0]
    return -np.sum(p * np.log2(p))


def test_01_perplexity_calibration(report):
    X = np.random.default_rng(0).normal(size=(200, 10))
    worst, t0 = 0.0, time.perf_counter()
    for perp in (5.0, 50.0):
        _, P = calibrate_sigmas(pairwise_sq_dists(X), perp)
        worst = max(worst, max(abs(2 ** entropy_bits(row) - perp) for row in P))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 5.0
    assert report(1, ok, f"perplexity calibration: max |2^H - perp| = {worst:.2e}, {elapsed:.2f} s")


def test_02_gradient_check(report):
    h, worst = 1e-5, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        P = rng.random((8, 8))
        P = P + P.T
        np.fill_diagonal(P, 0)
        P /= P.sum()
        Y = rng.normal(size=(8, 2))
        G = kl_gradient(P, Y)
        num = np.zeros_like(Y)
        for idx in np.ndindex(Y.shape):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[idx] += h
            Ym[idx] -= h
            num[idx] = (kl_divergence(P, low_dim_affinities(Yp)[0])
                        - kl_divergence(P, low_dim_affinities(Ym)[0])) / (2 * h)
        worst = max(worst, np.linalg.norm(G - num) / np.linalg.norm(num))
    assert report(2, worst <= 1e-4, f"KL gradient vs central differences: worst relative error {worst:.2e}")


def test_03_descent(report):
    margins = []
    for seed in range(5):
        X, _ = blobs(150, 5, 3, seed=seed)
        emb = tsne_fit(X, TsneConfig(seed=seed))
        margins.append(emb.kl_history[100] - emb.final_kl)
    ok = min(margins) > 0
    assert report(3, ok, f"t-SNE final KL below KL at iteration 100 on 5 seeds; smallest drop {min(margins):.4f}")


@pytest.fixture(scope="module")
def rpm_data():
    return rpm_blobs(300, 13, seed=0)


def test_04_cluster_recovery(report, rpm_data):
    X, y = rpm_data
    ts = tsne_fit(X, TsneConfig(perplexity=50, learning_rate=100, seed=0)).coords
    kp = kpca_fit_exact(X, 2).train_scores
    res = {name: (label_purity(Y, y), davies_bouldin(Y, y)) for name, Y in (("tsne", ts), ("kpca", kp))}
    ok = all(p >= 0.95 and db <= 0.5 for p, db in res.values())
    detail = "; ".join(f"{k} purity {p:.3f} DB {db:.4f}" for k, (p, db) in res.items())
    assert report(4, ok, f"cluster recovery: {detail}")


def test_05_linear_kpca_is_pca(report):
    worst = 0.0
    for seed in range(10):
        X = np.random.default_rng(seed).normal(size=(100, 6)) @ np.diag([4, 3, 2, 1, 0.5, 0.25])
        Z = (X - X.mean(0)) / X.std(0)
        _, U = np.linalg.eigh(np.cov(Z, rowvar=False, bias=True))
        ref = Z @ U[:, ::-1][:, :3]
        got = kpca_fit_exact(X, 3, KernelSpec("linear")).train_scores
        got = got * np.sign(np.sum(got * ref, axis=0))
        worst = max(worst, np.max(np.abs(got - ref)))
    assert report(5, worst <= 1e-8, f"linear-kernel KPCA vs PCA oracle: max deviation {worst:.2e}")


def test_06_nystrom_exactness(report):
    X, _ = blobs(300, 6, 3, seed=3)
    ex = kpca_fit_exact(X, 2).train_scores
    ny = kpca_fit_nystrom(X, k=2, landmarks=X).train_scores
    ny = ny * np.sign(np.sum(ny * ex, axis=0))
    rel = np.max(np.abs(ny - ex)) / np.max(np.abs(ex))
    assert report(6, rel <= 1e-6, f"Nystrom with c=n landmarks vs exact KPCA: relative error {rel:.2e}")


def test_07_nystrom_speed_and_memory(report, monkeypatch):
    n, c = 2000, 100
    X, _ = blobs(n, 13, 3, seed=4)
    spec = KernelSpec("rbf", 0.05)

    def best_of(fn, reps=3):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    t_exact = best_of(lambda: kpca_fit_exact(X, 2, spec), reps=2)
    t_ny = best_of(lambda: kpca_fit_nystrom(X, c, 2, spec))

    # structural check: no kernel block with n rows and n columns is ever built
    shapes = []
    real = kpca_mod.kernel_matrix
    monkeypatch.setattr(kpca_mod, "kernel_matrix", lambda A, B, s: shapes.append(r := real(A, B, s)) or r)
    tracemalloc.start()
    kpca_fit_nystrom(X, c, 2, spec)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    square = any(r.shape == (n, n) for r in shapes)
    ok = t_exact / t_ny >= 5 and not square and peak < n * n * 8 / 4
    assert report(7, ok, f"Nystrom n={n} c={c}: {t_exact / t_ny:.1f}x faster ({t_exact:.2f} s vs {t_ny:.2f} s); "
                         f"peak {peak / 1e6:.1f} MB vs {n * n * 8 / 1e6:.0f} MB for one n x n array; "
                         f"kernel blocks {sorted({r.shape for r in shapes})}")


def test_08_davies_bouldin_oracle(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(k + 5, 60))
        X = rng.normal(size=(n, int(rng.integers(1, 5)))) + rng.normal(size=(1, 1)) * 3
        y = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        worst = max(worst, abs(davies_bouldin(X, y) - db_oracle(X.tolist(), y.tolist())))
    hand = davies_bouldin([[0, 0], [0, 2], [10, 0], [10, 2]], [0, 0, 1, 1])
    ok = worst <= 1e-12 and abs(hand - 0.2) <= 1e-15
    assert report(8, ok, f"Davies-Bouldin vs double-loop oracle: worst {worst:.1e}; hand case {hand!r}")


def test_09_pure_tone(report):
    rate, n = 12800.0, 12800 * 10 + 777
    t = np.arange(n) / rate
    spec = stft_frames(SignalTrace(np.sin(2 * np.pi * 1000.0 * t), rate), 4096, 2048)
    peaks = np.argmax(spec.db, axis=1)
    expected = (n - 4096) // 2048 + 1
    ok = bool(np.all(peaks == 320)) and len(spec) == expected == frame_count(n, 4096, 2048)
    assert report(9, ok, f"1000 Hz tone: peak bins {sorted(set(peaks.tolist()))}, {len(spec)} frames (expected {expected})")


def test_10_segmentation_recovery(report):
    rng = np.random.default_rng(10)
    n, worst, knot_err = 2049, 0.0, 0
    for _ in range(3):
        while True:
            knots = np.sort(rng.choice(np.arange(20, n - 20), 12, replace=False))
            if np.min(np.diff(knots)) >= 20:
                break
        slopes = rng.permutation(np.linspace(5.0, 200.0, 13))
        curve = piecewise_curve(n, knots.tolist(), slopes.tolist())
        scheme = segment_curve(curve, 13)
        worst = max(worst, segmentation_sse(curve, scheme))
        knot_err = max(knot_err, int(np.max(np.abs(np.array(scheme.breakpoints[1:-1]) - knots))))
    ok = worst <= 1e-8 and knot_err <= 1
    assert report(10, ok, f"13-piece curve: worst SSE {worst:.2e}, breakpoints within {knot_err} bin of the true knots")


def test_11_drift_tail(report):
    rng = np.random.default_rng(11)
    model = fit_baseline(rng.normal(size=(1000, 2)))
    ramp = np.linspace(0, 8, 80)[:, None] * np.array([[0.6, 0.8]]) + model.centroids[0]
    increasing = bool(np.all(np.diff(drift_score(model, ramp).scores) > 0))
    rate = float(drift_score(model, rng.normal(size=(1000, 2))).alarms.mean())
    ok = increasing and abs(rate - 0.05) <= 0.03
    assert report(11, ok, f"drift ramp strictly increasing: {increasing}; held-out alarm rate {rate:.3f}")


def test_12_round_trip(report, tmp_path):
    X, y = blobs(200, 5, 3, seed=12)
    Xnew = X + np.random.default_rng(0).normal(size=X.shape)
    worst = 0.0
    for name, m in (("exact", kpca_fit_exact(X, 2)), ("nystrom", kpca_fit_nystrom(X, 40, 2))):
        m.save(tmp_path / f"{name}.json")
        back = KpcaModel.load(tmp_path / f"{name}.json")
        worst = max(worst, np.max(np.abs(back.project(Xnew) - m.project(Xnew))))
    base = fit_baseline(kpca_fit_exact(X, 2).train_scores, labels=y)
    base.save(tmp_path / "base.json")
    pts = kpca_fit_exact(X, 2).project(Xnew)
    worst_b = np.max(np.abs(drift_score(BaselineModel.load(tmp_path / "base.json"), pts).scores
                            - drift_score(base, pts).scores))
    ok = worst <= 1e-12 and worst_b <= 1e-12
    assert report(12, ok, f"reload round trip: KPCA projections {worst:.1e}, baseline scores {worst_b:.1e}")


def _turbofan_path():
    env = os.environ.get("FAULTMAP_TURBOFAN")
    if env:
        return Path(env)
    local = Path(__file__).resolve().parent.parent / "data" / "turbofan_train.txt"
    return local if local.exists() else None


@pytest.mark.slow
def test_13_turbofan(report):
    path = _turbofan_path()
    if path is None:
        report(13, None, "turbofan data not present (set FAULTMAP_TURBOFAN to a training file)")
        pytest.skip("turbofan data not present")
    from faultmap.turbofan import ingest_turbofan, operating_condition_labels

    data = ingest_turbofan(path)
    min_life = min(data.engine_lives().values())
    normal = data.normal_subset(60)
    cond = operating_condition_labels(normal.settings)
    n_cond = np.unique(cond).size
    X = normal.features
    kp = (kpca_fit_exact(X, 2) if X.shape[0] <= 3000 else kpca_fit_nystrom(X, 100, 2)).train_scores
    db_kpca = davies_bouldin(kp, cond)
    ts = tsne_fit(X, TsneConfig(perplexity=5, learning_rate=100, seed=0)).coords
    db_tsne = davies_bouldin(ts, cond)
    ok = n_cond == 6 and db_kpca <= 0.5 and db_tsne <= 1.0 and min_life == 139
    assert report(13, ok, f"turbofan: {n_cond} conditions, KPCA DB {db_kpca:.4f}, t-SNE DB {db_tsne:.4f}, "
                          f"shortest life {min_life} cycles")
