"""Operating conditions in the turbofan degradation data.

Needs a training file from the public turbofan run-to-failure dataset
(26 whitespace-separated columns per line). Flights from the first 60
cycles of each engine are treated as normal; they are embedded with KPCA
and coloured by operating condition, then every flight is scored against a
per-condition baseline so late-life flights show up as drift.

Run:  python demos/turbofan_conditions.py path/to/train.txt [output_dir]
"""

import sys
from pathlib import Path

import numpy as np

from faultmap import (davies_bouldin, drift_score, fit_baseline, ingest_turbofan, kpca_fit_nystrom,
                      kpca_project, operating_condition_labels, scatter_svg)


def main(path, out_dir="demo_output"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = ingest_turbofan(path)
    lives = data.engine_lives()
    print(f"{len(lives)} engines, {len(data)} flights, shortest life {min(lives.values())} cycles")

    normal = data.normal_subset(60)
    cond = operating_condition_labels(normal.settings)
    print(f"{np.unique(cond).size} operating conditions among {len(normal)} normal flights")

    model = kpca_fit_nystrom(normal.features, c=100, k=2)
    Y = model.train_scores
    print(f"KPCA DB index by condition: {davies_bouldin(Y, cond):.4f}")
    (out / "turbofan_conditions.svg").write_text(
        scatter_svg(Y[:, 0], Y[:, 1], cond, title="cycles <= 60 by operating condition"), encoding="utf-8")

    base = fit_baseline(Y, labels=cond)
    allY = kpca_project(model, data.features)
    rep = drift_score(base, allY)
    late = data.cycle > np.array([lives[e] for e in data.engine_id]) - 20
    print(f"alarm rate: first 60 cycles {rep.alarms[data.cycle <= 60].mean():.3f}, "
          f"last 20 cycles {rep.alarms[late].mean():.3f}")
    (out / "turbofan_cycles.svg").write_text(
        scatter_svg(allY[:, 0], allY[:, 1], data.cycle, kind="numeric", title="all flights by cycle"),
        encoding="utf-8")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    main(*sys.argv[1:])
