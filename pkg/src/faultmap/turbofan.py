"""Loader for run-to-failure turbofan degradation records.

Each line holds 26 whitespace-separated numbers: engine id, cycle, three
operational settings and 21 sensor channels. The loader does not care which
published subset a file comes from.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DataFormatError

N_SETTINGS = 3
N_SENSORS = 21
N_COLUMNS = 2 + N_SETTINGS + N_SENSORS
SETTING_COLUMNS = [f"setting{i}" for i in range(1, N_SETTINGS + 1)]
SENSOR_COLUMNS = [f"sensor_{i}" for i in range(1, N_SENSORS + 1)]
FEATURE_COLUMNS = SETTING_COLUMNS + SENSOR_COLUMNS


@dataclass(frozen=True)
class TurbofanRecord:
    engine_id: int
    cycle: int
    op_settings: tuple[float, float, float]
    sensors: tuple[float, ...]


@dataclass(frozen=True)
class TurbofanData:
    engine_id: np.ndarray   # (n,) int
    cycle: np.ndarray       # (n,) int
    settings: np.ndarray    # (n, 3)
    sensors: np.ndarray     # (n, 21)

    def __len__(self):
        return self.engine_id.size

    @property
    def features(self) -> np.ndarray:
        """The 24 per-flight variables: settings then sensors."""
        return np.hstack([self.settings, self.sensors])

    def engine_lives(self) -> dict[int, int]:
        """Last recorded cycle of every engine."""
        return {int(e): int(self.cycle[self.engine_id == e].max()) for e in np.unique(self.engine_id)}

    def records(self):
        for i in range(len(self)):
            yield TurbofanRecord(int(self.engine_id[i]), int(self.cycle[i]),
                                 tuple(self.settings[i]), tuple(self.sensors[i]))

    def select(self, mask) -> "TurbofanData":
        return TurbofanData(self.engine_id[mask], self.cycle[mask], self.settings[mask], self.sensors[mask])

    def normal_subset(self, max_cycle: int = 60) -> "TurbofanData":
        return self.select(self.cycle <= max_cycle)


def ingest_turbofan(path) -> TurbofanData:
    """Parse a whitespace-separated turbofan file.

    Blank lines are skipped. A line without exactly 26 numeric fields raises
    :class:`DataFormatError` naming the line; gaps in an engine's cycle
    sequence only produce a warning.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != N_COLUMNS:
                raise DataFormatError(f"{path}:{lineno}: expected {N_COLUMNS} columns, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise DataFormatError(f"{path}: no records")
    A = np.asarray(rows)
    if not np.all(np.isfinite(A)):
        raise DataFormatError(f"{path}: non-finite values")
    ids = A[:, 0].astype(int)
    cycles = A[:, 1].astype(int)
    if np.any(cycles < 1):
        bad = int(np.argmax(cycles < 1))
        raise DataFormatError(f"{path}: cycle must be >= 1 (record {bad + 1})")
    for e in np.unique(ids):
        c = np.sort(cycles[ids == e])
        if not np.array_equal(c, np.arange(1, c.size + 1)):
            warnings.warn(f"engine {e}: cycles are not contiguous from 1", stacklevel=2)
    return TurbofanData(ids, cycles, A[:, 2:2 + N_SETTINGS], A[:, 2 + N_SETTINGS:])


def operating_condition_labels(settings, decimals: int = 2) -> np.ndarray:
    """Label each flight by a short hash of its rounded operational settings."""
    settings = np.atleast_2d(np.asarray(settings, dtype=float))
    rounded = np.round(settings, decimals) + 0.0  # folds -0.0 into 0.0
    out = []
    for row in rounded:
        key = "|".join(f"{v:.{decimals}f}" for v in row)
        out.append("cond_" + hashlib.sha1(key.encode()).hexdigest()[:8])
    return np.asarray(out)
