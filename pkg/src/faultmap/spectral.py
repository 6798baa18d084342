"""Band features from a single-channel vibration signal.

Pipeline: Hann-windowed STFT frames -> dB magnitude spectra -> trailing
moving average -> sum of dB magnitude inside each of 13 frequency bands.
The bands come from a least-squares piecewise-linear fit to the cumulative
magnitude curve of a reference ("normal") spectrum; the fit is done once and
then reused for every trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .numerics import as_feature_matrix

DB_EPS = 1e-12
DB_FLOOR = 20.0 * np.log10(DB_EPS)  # -240 dB, the value of a silent bin
N_BANDS = 13
SCHEME_SCHEMA = "segmentation-scheme/v1"


@dataclass(frozen=True)
class SignalTrace:
    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains NaN or infinite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))


@dataclass(frozen=True)
class Spectra:
    """A sequence of dB spectra, one row per STFT frame."""

    db: np.ndarray            # (n_frames, window // 2 + 1)
    bin_width_hz: float
    frame_index: np.ndarray   # (n_frames,) ordinal frame positions in the trace

    @property
    def n_bins(self) -> int:
        return self.db.shape[1]

    def __len__(self):
        return self.db.shape[0]


@dataclass(frozen=True)
class SegmentationScheme:
    """Band edges as bin indices: ``breakpoints[j]:breakpoints[j + 1]`` is band j."""

    breakpoints: tuple[int, ...]

    def __post_init__(self):
        bp = tuple(int(b) for b in self.breakpoints)
        if len(bp) < 2 or bp[0] != 0:
            raise ValueError(f"breakpoints must start at 0, got {bp}")
        if any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be strictly increasing, got {bp}")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n_bands(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def n_bins(self) -> int:
        return self.breakpoints[-1]

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEME_SCHEMA, "breakpoints": list(self.breakpoints)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SegmentationScheme":
        doc = json.loads(text)
        if doc.get("schema") != SCHEME_SCHEMA:
            raise ValueError(f"expected schema {SCHEME_SCHEMA!r}, got {doc.get('schema')!r}")
        return cls(tuple(doc["breakpoints"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SegmentationScheme":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def frame_count(n_samples: int, window: int, hop: int) -> int:
    return (n_samples - window) // hop + 1


def stft_frames(trace: SignalTrace, window: int = 4096, hop: int = 2048) -> Spectra:
    """dB magnitude spectra of Hann-windowed frames.

    Frame ``i`` covers samples ``i*hop : i*hop + window``. Magnitudes are the
    raw (unscaled) rFFT moduli floored at 1e-12 before taking ``20 log10``.
    """
    if window < 2 or window & (window - 1):
        raise ValueError(f"window must be a power of two >= 2, got {window}")
    if not 0 < hop <= window:
        raise ValueError(f"hop must satisfy 0 < hop <= window, got {hop}")
    x = trace.samples
    if x.size < window:
        raise ValueError(f"trace has {x.size} samples; at least {window} (one window) are required")
    n_frames = frame_count(x.size, window, hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, window)[::hop][:n_frames]
    taper = get_window("hann", window)  # periodic Hann
    mag = np.abs(np.fft.rfft(frames * taper, axis=1))
    db = 20.0 * np.log10(np.maximum(mag, DB_EPS))
    return Spectra(db, trace.sample_rate_hz / window, np.arange(n_frames))


def span_frames(seconds: float, sample_rate_hz: float, hop: int) -> int:
    """Number of STFT frames covering ``seconds`` of signal (at least one)."""
    return max(1, int(round(seconds * sample_rate_hz / hop)))


def average_spectra(spectra: Spectra, span: int) -> Spectra:
    """Trailing moving average: row i is the mean of rows ``max(0, i-span+1) .. i``."""
    if span < 1:
        raise ValueError(f"span must be >= 1, got {span}")
    if len(spectra) == 0:
        raise ValueError("no spectra to average")
    db = spectra.db
    out = np.empty_like(db)
    for i in range(db.shape[0]):
        out[i] = db[max(0, i - span + 1):i + 1].mean(axis=0)
    return Spectra(out, spectra.bin_width_hz, spectra.frame_index.copy())


def cumulative_magnitude(db) -> np.ndarray:
    """Running sum of dB magnitudes shifted up by the silent-bin floor.

    The shift makes every increment non-negative, so the curve is monotone.
    """
    db = np.asarray(db, dtype=float)
    return np.cumsum(db - DB_FLOOR, axis=-1)


# --- piecewise-linear segmentation ------------------------------------------


def _segment_costs_dp(y: np.ndarray, k: int):
    """Exact DP over breakpoints for a k-piece least-squares linear fit.

    Segment SSEs are accumulated with Welford-style co-moment updates on the
    detrended curve (a global linear trend does not change any per-segment
    optimum, but removing it keeps the co-moments small).
    """
    n = y.size
    x = np.arange(n, dtype=float)
    raw_ss = float(np.sum((y - y.mean()) ** 2))
    slope, icpt = np.polyfit(x, y, 1)
    r = y - (slope * x + icpt)
    det_ss = float(np.sum((r - r.mean()) ** 2))
    tie_tol = 1e-20 * raw_ss + 1e-13 * det_ss

    inf = np.inf
    cost = np.full((k + 1, n + 1), inf)
    even = np.full((k + 1, n + 1), inf)
    back = np.zeros((k + 1, n + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    even[0, 0] = 0.0

    # co-moments of segments [t, s) for every start t < s
    cnt = np.zeros(n)
    mx = np.zeros(n)
    my = np.zeros(n)
    sxx = np.zeros(n)
    syy = np.zeros(n)
    sxy = np.zeros(n)
    for s in range(1, n + 1):
        # append point s-1 to all segments starting at t <= s-1
        xs, ys = x[s - 1], r[s - 1]
        sl = slice(0, s)
        cnt[sl] += 1.0
        dx = xs - mx[sl]
        dy = ys - my[sl]
        mx[sl] += dx / cnt[sl]
        my[sl] += dy / cnt[sl]
        ex = xs - mx[sl]
        ey = ys - my[sl]
        sxx[sl] += dx * ex
        syy[sl] += dy * ey
        sxy[sl] += dx * ey
        with np.errstate(divide="ignore", invalid="ignore"):
            seg = np.where(sxx[sl] > 0, syy[sl] - sxy[sl] ** 2 / sxx[sl], 0.0)
        np.maximum(seg, 0.0, out=seg)
        lengths_sq = (s - np.arange(s, dtype=float)) ** 2
        for j in range(1, min(k, s) + 1):
            cand = cost[j - 1, :s] + seg
            best = cand.min()
            if not np.isfinite(best):
                continue
            ok = cand <= best + tie_tol
            ev = np.where(ok, even[j - 1, :s] + lengths_sq, inf)
            t = int(np.argmin(ev))
            cost[j, s] = cand[t]
            even[j, s] = ev[t]
            back[j, s] = t
    return cost, back


def _line_sse(y: np.ndarray, lo: int, hi: int) -> float:
    seg = y[lo:hi]
    if seg.size <= 2:
        return 0.0
    x = np.arange(lo, hi, dtype=float)
    A = np.column_stack([np.ones_like(x), x - x.mean()])
    coef, *_ = np.linalg.lstsq(A, seg, rcond=None)
    return float(np.sum((seg - A @ coef) ** 2))


def segmentation_sse(curve, scheme: SegmentationScheme) -> float:
    """Total squared error of per-band least-squares lines, computed directly."""
    y = np.asarray(curve, dtype=float)
    bp = scheme.breakpoints
    return sum(_line_sse(y, a, b) for a, b in zip(bp, bp[1:]))


def segment_curve(curve, k: int = N_BANDS) -> SegmentationScheme:
    """Optimal k-piece least-squares linear segmentation of a 1-d curve.

    Breakpoints are found by exact dynamic programming over all placements.
    Placements whose error agrees to within floating-point noise are treated
    as tied, and ties go to the most even segment lengths (smallest sum of
    squared lengths), then to the earliest breakpoint.
    """
    y = np.asarray(curve, dtype=float).ravel()
    if k < 1:
        raise ValueError(f"segment count must be >= 1, got {k}")
    if k >= y.size:
        raise ValueError(f"segment count k={k} must be smaller than curve length {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("curve contains NaN or infinite values")
    n = y.size
    _, back = _segment_costs_dp(y, k)
    bps = [n]
    s = n
    for j in range(k, 0, -1):
        s = int(back[j, s])
        bps.append(s)
    return SegmentationScheme(tuple(reversed(bps)))


def band_features(db, scheme: SegmentationScheme) -> np.ndarray:
    """Sum of dB magnitudes inside each band. Works on one spectrum or a stack."""
    db = np.asarray(db, dtype=float)
    if db.shape[-1] != scheme.n_bins:
        raise ValueError(f"spectrum has {db.shape[-1]} bins but the scheme covers {scheme.n_bins}")
    bp = scheme.breakpoints
    # per-band slices summed directly; prefix-sum differences lose digits
    return np.stack([db[..., a:b].sum(axis=-1) for a, b in zip(bp, bp[1:])], axis=-1)


def fit_scheme(reference: SignalTrace, window: int = 4096, hop: int = 2048,
               span_seconds: float = 20.0, k: int = N_BANDS) -> SegmentationScheme:
    """Fit band edges on a normal-condition reference trace.

    The curve segmented is the cumulative magnitude of the mean of the
    reference trace's averaged spectra.
    """
    spectra = stft_frames(reference, window, hop)
    avg = average_spectra(spectra, span_frames(span_seconds, reference.sample_rate_hz, hop))
    return segment_curve(cumulative_magnitude(avg.db.mean(axis=0)), k)


def featurize_trace(trace: SignalTrace, scheme: SegmentationScheme, window: int = 4096,
                    hop: int = 2048, span: int | None = None,
                    span_seconds: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
    """Band features for every averaged spectrum of ``trace``.

    Returns
    -------
    features : ndarray, shape (n_frames, n_bands)
    frame_index : ndarray, shape (n_frames,)
    """
    if scheme.n_bins != window // 2 + 1:
        raise ValueError(f"scheme covers {scheme.n_bins} bins but window {window} "
                         f"yields {window // 2 + 1}")
    if span is None:
        span = span_frames(span_seconds, trace.sample_rate_hz, hop)
    avg = average_spectra(stft_frames(trace, window, hop), span)
    feats = as_feature_matrix(band_features(avg.db, scheme), "features")
    return feats, avg.frame_index


def band_column_names(n_bands: int = N_BANDS) -> list[str]:
    return [f"band_{j:02d}" for j in range(n_bands)]
