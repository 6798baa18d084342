"""Command-line entry point: ``faultmap <command> ...``.

Exit codes: 0 success, 2 usage/config error, 3 data-format error,
4 numerical failure. Errors are reported on stderr as one line,
``faultmap: error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import detect, kpca, metrics, spectral, tsne, turbofan
from .exceptions import ConvergenceError, DataFormatError
from .svgplot import scatter_svg

log = logging.getLogger("faultmap")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- config files -------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, argv, args):
    cfg = read_config(args.config)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        if key not in actions or key in ("config", "help") or not actions[key].option_strings:
            raise UsageError(f"unknown config key {key!r} for command {args.command!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# --- CSV helpers ----------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _split(cols: str | None) -> list[str]:
    return [c.strip() for c in cols.split(",") if c.strip()] if cols else []


def read_table(path, label_cols=()):
    """Read a CSV with header into (numeric matrix, feature names, label columns)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataFormatError(f"{path}: missing header row")
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    missing = [c for c in label_cols if c not in header]
    if missing:
        raise UsageError(f"label column(s) not in {path}: {', '.join(missing)}")
    passthrough = list(label_cols) + (["frame_index"] if "frame_index" in header
                                      and "frame_index" not in label_cols else [])
    feat_idx = [i for i, h in enumerate(header) if h not in passthrough]
    X = np.empty((len(rows), len(feat_idx)))
    for r, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        try:
            X[r - 2] = [float(row[i]) for i in feat_idx]
        except ValueError:
            raise DataFormatError(f"{path}:{r}: non-numeric feature value "
                                  "(list text columns with --label-cols)") from None
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: non-finite feature values")
    labels = {c: [row[header.index(c)] for row in rows] for c in passthrough}
    return X, [header[i] for i in feat_idx], labels


def write_table(path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow(row)


def read_embedding(path, dims=None):
    """Return (coords, dim names, all columns as strings) from an embedding CSV."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            header = reader.fieldnames or []
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from None
    if dims is None:
        dims = [h for h in header if h.startswith("dim") and h[3:].isdigit()]
    missing = [d for d in dims if d not in header]
    if missing or not dims:
        raise UsageError(f"{path}: missing dimension column(s) {missing or 'dim1,dim2'}")
    try:
        coords = np.array([[float(r[d]) for d in dims] for r in rows]).reshape(len(rows), len(dims))
    except ValueError:
        raise DataFormatError(f"{path}: non-numeric coordinate value") from None
    cols = {h: [r[h] for r in rows] for h in header}
    return coords, dims, cols


# --- commands -------------------------------------------------------------------


def _check_positive(**values):
    for name, v in values.items():
        if v is not None and not v > 0:
            raise UsageError(f"{name.replace('_', '-')} must be positive, got {v}")


def _validate_spectral(a):
    _check_positive(window=a.window, hop=a.hop, span_seconds=a.span_seconds, rate=a.rate)
    if a.window & (a.window - 1):
        raise UsageError(f"window must be a power of two, got {a.window}")
    if a.hop > a.window:
        raise UsageError(f"hop {a.hop} exceeds window {a.window}")


def read_trace(path, fmt: str, rate: float) -> spectral.SignalTrace:
    try:
        if fmt == "f32":
            samples = np.fromfile(path, dtype="<f4").astype(float)
        else:
            with open(path, encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
            try:
                float(lines[0].split(",")[0])
                start = 0
            except (ValueError, IndexError):
                start = 1
            samples = np.array([float(ln.split(",")[0]) for ln in lines[start:]])
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    try:
        return spectral.SignalTrace(samples, rate)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def cmd_featurize(a) -> int:
    _validate_spectral(a)
    if a.scheme is None and a.reference is None:
        raise UsageError("need --scheme (a saved segmentation) or --reference (a normal trace to fit one)")
    out = Path(a.output)
    trace = read_trace(a.trace, a.format, a.rate)
    if a.scheme is not None:
        try:
            scheme = spectral.SegmentationScheme.load(a.scheme)
        except (OSError, ValueError, KeyError) as exc:
            raise DataFormatError(f"cannot load scheme {a.scheme}: {exc}") from None
    else:
        ref = read_trace(a.reference, a.format, a.rate)
        scheme = spectral.fit_scheme(ref, a.window, a.hop, a.span_seconds, a.bands)
    feats, frames = spectral.featurize_trace(trace, scheme, a.window, a.hop,
                                             span_seconds=a.span_seconds)
    names = spectral.band_column_names(scheme.n_bands)
    write_table(out, ["frame_index"] + names,
                [frames.tolist()] + [[_fmt(v) for v in feats[:, j]] for j in range(feats.shape[1])])
    scheme_path = out.with_suffix(".scheme.json")
    scheme.save(scheme_path)
    print(f"wrote {feats.shape[0]} rows x {feats.shape[1]} bands to {out}; scheme {scheme_path}",
          file=sys.stderr)
    return 0


def cmd_fit(a) -> int:
    _check_positive(perplexity=a.perplexity, learning_rate=a.learning_rate, max_iter=a.max_iter,
                    components=a.components, landmarks=a.landmarks, gamma=a.gamma)
    if a.method == "tsne" and not a.perplexity > 1:
        raise UsageError(f"perplexity must exceed 1, got {a.perplexity}")
    if a.method == "tsne" and a.components not in (2, 3):
        raise UsageError(f"t-SNE embeds into 2 or 3 dimensions, got components={a.components}")
    labels = _split(a.label_cols)
    X, names, passthrough = read_table(a.features, labels)
    n = X.shape[0]
    if a.method == "tsne":
        if n < 4 or not a.perplexity < n:
            raise UsageError(f"perplexity {a.perplexity} must be smaller than the row count {n} (n >= 4)")
        cfg = tsne.TsneConfig(perplexity=a.perplexity, learning_rate=a.learning_rate,
                              out_dims=a.components,
                              max_iter=a.max_iter, seed=a.seed)
        coords = tsne.tsne_fit(X, cfg).coords
        model_path = None
    else:
        if a.components > n:
            raise UsageError(f"components {a.components} exceeds row count {n}")
        spec = kpca.KernelSpec(a.kernel, a.gamma if a.kernel == "rbf" else None)
        if a.method == "kpca-exact":
            model = kpca.kpca_fit_exact(X, a.components, spec, seed=a.seed)
        else:
            if a.landmarks > n:
                raise UsageError(f"landmarks {a.landmarks} exceeds row count {n}")
            model = kpca.kpca_fit_nystrom(X, a.landmarks, a.components, spec, seed=a.seed)
        model.feature_names = tuple(names)
        coords = model.train_scores
        model_path = Path(a.model) if a.model else Path(a.output).with_suffix(".model.json")
        model.save(model_path)
    dims = [f"dim{j + 1}" for j in range(coords.shape[1])]
    cols = [[_fmt(v) for v in coords[:, j]] for j in range(coords.shape[1])]
    write_table(a.output, dims + list(passthrough), cols + list(passthrough.values()))
    msg = f"wrote {a.method} embedding of {n} rows to {a.output}"
    print(msg + (f"; model {model_path}" if model_path else ""), file=sys.stderr)
    return 0


def cmd_score(a) -> int:
    _check_positive(threshold=a.threshold)
    try:
        model = kpca.KpcaModel.load(a.model)
    except (OSError, ValueError, KeyError) as exc:
        raise DataFormatError(f"cannot load model {a.model}: {exc}") from None
    base = None
    if a.baseline:
        try:
            base = detect.BaselineModel.load(a.baseline)
        except (OSError, ValueError, KeyError) as exc:
            raise DataFormatError(f"cannot load baseline {a.baseline}: {exc}") from None
        if base.dims != model.n_components:
            raise DataFormatError(f"baseline has {base.dims} dims but the model produces {model.n_components}")
        if a.threshold is not None:
            base = detect.BaselineModel(base.centroids, base.scales, base.cluster_labels,
                                        base.source, a.threshold)
    try:
        src = open(a.features, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {a.features}: {exc.strerror}") from None
    with src, open(a.output, "w", newline="", encoding="utf-8") as dst:
        reader = csv.reader(src)
        header = [h.strip() for h in next(reader, [])]
        if model.feature_names is not None:
            missing = [c for c in model.feature_names if c not in header]
            if missing:
                raise DataFormatError(f"feature columns missing from {a.features}: {', '.join(missing)}")
            idx = [header.index(c) for c in model.feature_names]
        else:
            idx = [i for i, h in enumerate(header) if h != "frame_index"]
        if len(idx) != model.n_features:
            raise DataFormatError(f"model expects {model.n_features} features, file has {len(idx)}")
        writer = csv.writer(dst, lineterminator="\n")
        dims = [f"dim{j + 1}" for j in range(model.n_components)]
        writer.writerow(["index", "score", "nearest_cluster", "alarm"] if base else ["index"] + dims)
        for i, row in enumerate(r for r in reader if r):
            try:
                x = np.array([[float(row[j]) for j in idx]])
            except (ValueError, IndexError):
                raise DataFormatError(f"{a.features}:{i + 2}: malformed row") from None
            s = kpca.kpca_project(model, x)
            if base is None:
                writer.writerow([i] + [_fmt(v) for v in s[0]])
            else:
                rep = detect.drift_score(base, s)
                writer.writerow([i, _fmt(rep.scores[0]), rep.nearest_cluster[0], int(rep.alarms[0])])
    return 0


def _cycle_mask(cols, a, path):
    if a.max_cycle is None:
        return None
    if a.cycle_col not in cols:
        raise UsageError(f"{path}: no {a.cycle_col!r} column for --max-cycle")
    try:
        return np.array([float(v) <= a.max_cycle for v in cols[a.cycle_col]])
    except ValueError:
        raise DataFormatError(f"{path}: non-numeric {a.cycle_col!r} values") from None


def cmd_baseline(a) -> int:
    _check_positive(threshold=a.threshold, clusters=a.clusters, max_cycle=a.max_cycle)
    if a.label_col is None and a.clusters is None:
        raise UsageError("need --label-col or --clusters")
    coords, _, cols = read_embedding(a.embedding, _split(a.dims) or None)
    labels = None
    if a.label_col is not None:
        if a.label_col not in cols:
            raise UsageError(f"{a.embedding}: no column {a.label_col!r}")
        labels = np.asarray(cols[a.label_col])
    mask = _cycle_mask(cols, a, a.embedding)
    fit_coords, fit_labels = coords, labels
    if mask is not None:
        fit_coords = coords[mask]
        fit_labels = None if labels is None else labels[mask]
    model = detect.fit_baseline(fit_coords, fit_labels, a.clusters, a.seed, a.threshold)
    model.save(a.output)
    print(f"baseline with {len(model.cluster_labels)} cluster(s) written to {a.output}", file=sys.stderr)
    if a.report:
        # rows of the same embedding file: valid for t-SNE, whose map cannot score new data
        rep = detect.drift_score(model, coords)
        write_table(a.report, ["index", "score", "nearest_cluster", "alarm"],
                    list(zip(*rep.to_csv_rows())))
    return 0


def cmd_dbindex(a) -> int:
    coords, _, cols = read_embedding(a.embedding, _split(a.dims) or None)
    if a.label_col not in cols:
        raise UsageError(f"{a.embedding}: no column {a.label_col!r}")
    labels = np.asarray(cols[a.label_col])
    mask = _cycle_mask(cols, a, a.embedding)
    if mask is not None:
        coords, labels = coords[mask], labels[mask]
    if np.unique(labels).size < 2:
        raise DataFormatError(f"{a.embedding}: Davies-Bouldin needs at least 2 distinct labels")
    print(f"{metrics.davies_bouldin(coords, labels):.10g}")
    return 0


def cmd_plot(a) -> int:
    coords, dims, cols = read_embedding(a.embedding, [a.x, a.y] if a.x and a.y else None)
    if len(dims) != 2:
        raise UsageError(f"embedding has {len(dims)} dimensions; choose two with --x and --y")
    color, kind = None, "categorical"
    if a.color_by:
        if a.color_by not in cols:
            raise UsageError(f"{a.embedding}: no column {a.color_by!r}")
        color = cols[a.color_by]
        kind = a.color_kind
        if kind == "auto":
            try:
                vals = [float(v) for v in color]
                kind = "numeric" if len(set(vals)) > 12 else "categorical"
            except ValueError:
                kind = "categorical"
    svg = scatter_svg(coords[:, 0], coords[:, 1], color, kind, title=a.title or "",
                      xlabel=dims[0], ylabel=dims[1])
    Path(a.output).write_text(svg, encoding="utf-8")
    return 0


def cmd_ingest_turbofan(a) -> int:
    _check_positive(cycle_cutoff=a.cycle_cutoff)
    data = turbofan.ingest_turbofan(a.path)
    lives = data.engine_lives()
    summary = {"engines": len(lives), "records": len(data),
               "min_life": min(lives.values()), "max_life": max(lives.values())}
    if a.normal_only:
        data = data.normal_subset(a.cycle_cutoff)
    cond = turbofan.operating_condition_labels(data.settings)
    summary["conditions"] = int(np.unique(cond).size)
    if a.output:
        feats = data.features
        write_table(a.output, ["engine_id", "cycle", "condition"] + turbofan.FEATURE_COLUMNS,
                    [data.engine_id.tolist(), data.cycle.tolist(), cond.tolist()]
                    + [[_fmt(v) for v in feats[:, j]] for j in range(feats.shape[1])])
    print(json.dumps(summary))
    return 0


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="faultmap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value file; command-line flags take precedence")
        sp.set_defaults(func=func)
        return sp

    s = add("featurize", cmd_featurize, "vibration trace -> 13 band features per averaged spectrum")
    s.add_argument("trace")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--rate", type=float, default=12800.0, help="sample rate in Hz")
    s.add_argument("--format", choices=["csv", "f32"], default="csv")
    s.add_argument("--scheme", help="saved segmentation-scheme/v1 JSON to reuse")
    s.add_argument("--reference", help="normal-condition trace to fit the band scheme on")
    s.add_argument("--window", type=int, default=4096)
    s.add_argument("--hop", type=int, default=2048)
    s.add_argument("--span-seconds", type=float, default=20.0)
    s.add_argument("--bands", type=int, default=spectral.N_BANDS)

    s = add("fit", cmd_fit, "embed a feature table with t-SNE or kernel PCA")
    s.add_argument("features")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--method", choices=["tsne", "kpca-exact", "kpca-nystrom"], default="kpca-exact")
    s.add_argument("--model", help="where to write the KPCA model (default: <output>.model.json)")
    s.add_argument("--label-cols", help="comma-separated non-feature columns to pass through")
    s.add_argument("--perplexity", type=float, default=30.0)
    s.add_argument("--learning-rate", type=float, default=100.0)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--components", type=int, default=2)
    s.add_argument("--landmarks", type=int, default=100)
    s.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)

    s = add("score", cmd_score, "project new feature rows through a saved KPCA model")
    s.add_argument("model")
    s.add_argument("features")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--baseline", help="baseline/v1 JSON; output becomes a drift report")
    s.add_argument("--threshold", type=float, default=None, help="override the baseline alarm threshold")

    s = add("baseline", cmd_baseline, "learn normal-cluster centroids and scales from an embedding")
    s.add_argument("embedding")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--label-col")
    s.add_argument("--clusters", type=int)
    s.add_argument("--dims")
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-cycle", type=float, default=None, help="fit only on rows with cycle <= this")
    s.add_argument("--cycle-col", default="cycle")
    s.add_argument("--report", help="also write a drift report for every row of the embedding")

    s = add("dbindex", cmd_dbindex, "Davies-Bouldin index of a labeled embedding")
    s.add_argument("embedding")
    s.add_argument("--label-col", required=True)
    s.add_argument("--dims")
    s.add_argument("--max-cycle", type=float, default=None)
    s.add_argument("--cycle-col", default="cycle")

    s = add("plot", cmd_plot, "SVG scatter of a 2-d embedding")
    s.add_argument("embedding")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--color-by")
    s.add_argument("--color-kind", choices=["auto", "categorical", "numeric"], default="auto")
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--title")

    s = add("ingest-turbofan", cmd_ingest_turbofan, "parse a turbofan degradation file")
    s.add_argument("path")
    s.add_argument("-o", "--output")
    s.add_argument("--normal-only", action="store_true", help="keep cycles <= --cycle-cutoff")
    s.add_argument("--cycle-cutoff", type=int, default=60)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            args = _apply_config(parser, sub, argv, args)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        kind, code = "usage", EXIT_USAGE
        msg = str(exc)
    except DataFormatError as exc:
        kind, code, msg = "data", EXIT_DATA, str(exc)
    except ConvergenceError as exc:
        kind, code, msg = "numerical", EXIT_NUMERIC, str(exc)
    except ValueError as exc:
        kind, code, msg = "data", EXIT_DATA, str(exc)
    print(f"faultmap: error[{kind}]: {' '.join(msg.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
