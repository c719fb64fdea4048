"""Command-line surface: evaluate, calibrate, report, correlate, validate.

Exit codes: 0 success, 1 metric errors (partial outputs still written),
2 configuration or manifest errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import load_manifest
from .engine import (
    ALL_METRICS,
    EvaluationPlan,
    evaluate_manifest,
    has_metric_errors,
    reduce_model,
)
from .errors import WowEvalError
from .scoring import (
    DEFAULT_MAPPINGS,
    GROUPS,
    correlations,
    deceive_ratio,
    fit_mapping_theta,
    mappings_from_records,
    mappings_to_records,
    metric_group,
    prescale,
)

CONFIG_ENV = "WOW_EVAL_CONFIG"

_DEFAULTS = {
    "mappings": None,
    "weights": None,
    "jobs": 1,
    "seed": 0,
    "metrics": None,
    "grid_max": 5.0,
    "grid_step": 0.01,
    "folds": 5,
    "format": "csv",
}


def _die(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _config_overlay(args):
    """Fill unset args from the WOW_EVAL_CONFIG file; flags win."""
    cfg_path = os.environ.get(CONFIG_ENV)
    if not cfg_path:
        return
    cfg = json.loads(Path(cfg_path).read_text())
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            setattr(args, attr, value)


def _apply_defaults(args):
    for key, value in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)


def _parse_weights(spec: str | None) -> dict:
    if not spec:
        return {}
    out = {}
    for part in spec.split(","):
        name, _, value = part.partition("=")
        if name not in GROUPS:
            raise ValueError(f"unknown group {name!r}")
        out[name] = float(value)
    return out


def _load_mappings(path: str | None):
    if path is None:
        return DEFAULT_MAPPINGS
    records = json.loads(Path(path).read_text())
    return mappings_from_records(records)


def _build_plan(args):
    mappings = _load_mappings(args.mappings)
    enabled = frozenset(args.metrics.split(",")) if args.metrics \
        else frozenset(ALL_METRICS)
    return EvaluationPlan(
        metrics_enabled=enabled,
        mappings=mappings,
        weights=_parse_weights(args.weights),
        jobs=int(args.jobs),
        seed=int(args.seed),
    )


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
        plan = _build_plan(args)
    except (WowEvalError, OSError, ValueError, json.JSONDecodeError) as exc:
        return _die(str(exc))

    base = Path(args.manifest).parent
    out = Path(args.out)
    records = evaluate_manifest(manifest, plan, base)

    by_model = {}
    for rec in records:
        by_model.setdefault(rec.model, []).append(rec)

    rows = []
    for model in manifest.models():
        card = reduce_model(by_model[model], plan)
        card["dataset"] = manifest.dataset_name
        card["dataset_version"] = manifest.version
        _write_text(out / f"scorecard_{model}.json", _dump_json(card))
        row = {"model": model}
        for g in GROUPS:
            row[g] = card["groups"].get(g)
        row["overall"] = card["overall"]
        rows.append(row)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", *GROUPS, "overall"])
    for row in rows:
        writer.writerow([row["model"]]
                        + [_fmt(row[g]) for g in GROUPS]
                        + [_fmt(row["overall"])])
    _write_text(out / "leaderboard.csv", buf.getvalue())

    if has_metric_errors(records):
        print("completed with metric errors; see scorecards", file=sys.stderr)
        return 1
    return 0


def _fmt(v):
    return "" if v is None else repr(float(v))


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _read_ratings(path):
    """CSV (id, rating[, rater_id]); ratings average per id."""
    sums, counts = {}, {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            if not row:
                continue
            rid, rating = row[0], float(row[1])
            sums[rid] = sums.get(rid, 0.0) + rating
            counts[rid] = counts.get(rid, 0) + 1
    return {rid: sums[rid] / counts[rid] for rid in sums}, header


def _read_metric_table(path):
    """CSV (id, metric, value) -> metric -> {id: value}."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            rid, metric, value = row[0], row[1], float(row[2])
            out.setdefault(metric, {})[rid] = value
    return out


def cmd_calibrate(args) -> int:
    try:
        if float(args.grid_step) <= 0 or float(args.grid_max) <= 0:
            return _die("--grid-step and --grid-max must be positive")
        metric_table = _read_metric_table(args.metrics_table)
        ratings, _ = _read_ratings(args.human)
        base_mappings = {m.metric: m for m in _load_mappings(args.mappings)}
    except (OSError, ValueError, json.JSONDecodeError, WowEvalError) as exc:
        return _die(str(exc))

    results = []
    for metric in sorted(metric_table):
        values = metric_table[metric]
        orphans = sorted(set(values) ^ set(ratings))
        if orphans:
            return _die(f"metric {metric!r}: ids without a counterpart: "
                        f"{orphans}")
        if metric not in base_mappings:
            return _die(f"metric {metric!r} has no base mapping (anchors)")
        spec = base_mappings[metric]
        ids = sorted(values)
        x = np.array([prescale(values[i], spec) for i in ids])
        y = np.array([ratings[i] for i in ids])
        best = None
        for family in ("gamma", "logit", "tanh"):
            try:
                theta, obj, fold_plan = fit_mapping_theta(
                    x, y, family,
                    grid_max=float(args.grid_max),
                    grid_step=float(args.grid_step),
                    folds=int(args.folds), seed=int(args.seed))
            except WowEvalError as exc:
                return _die(f"metric {metric!r}, family {family}: {exc}")
            if best is None or obj > best["objective"] + 1e-9:
                best = {"metric": metric, "direction": spec.direction,
                        "L": spec.L, "U": spec.U, "family": family,
                        "theta": theta, "objective": obj,
                        "fold_plan": fold_plan}
        results.append(best)

    _write_text(Path(args.out) / "mappings.json", _dump_json(results))
    return 0


# ---------------------------------------------------------------------------
# report / correlate
# ---------------------------------------------------------------------------

def _scatter_svg(x, y, labels, r, rho, xlabel, ylabel) -> str:
    """Standalone SVG scatter with a least-squares line."""
    W, H, pad = 640, 480, 60
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    xr = (x1 - x0) or 1.0
    yr = (y1 - y0) or 1.0

    def sx(v):
        return pad + (v - x0) / xr * (W - 2 * pad)

    def sy(v):
        return H - pad - (v - y0) / yr * (H - 2 * pad)

    slope, intercept = np.polyfit(x, y, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" '
        'stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" '
        'stroke="black"/>',
        f'<line x1="{sx(x0):.2f}" y1="{sy(slope * x0 + intercept):.2f}" '
        f'x2="{sx(x1):.2f}" y2="{sy(slope * x1 + intercept):.2f}" '
        'stroke="steelblue" stroke-width="1.5"/>',
    ]
    for xi, yi, label in zip(x, y, labels):
        parts.append(f'<circle cx="{sx(xi):.2f}" cy="{sy(yi):.2f}" r="4" '
                     'fill="crimson"/>')
        parts.append(f'<text x="{sx(xi) + 6:.2f}" y="{sy(yi) - 6:.2f}" '
                     f'font-size="11">{label}</text>')
    parts.append(f'<text x="{pad}" y="30" font-size="14">'
                 f'r = {r:.4f}, rho = {rho:.4f}</text>')
    parts.append(f'<text x="{W // 2}" y="{H - 15}" font-size="12" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="15" y="{H // 2}" font-size="12" '
                 f'transform="rotate(-90 15 {H // 2})" '
                 f'text-anchor="middle">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _read_scorecards(paths):
    cards = []
    for p in paths:
        cards.append(json.loads(Path(p).read_text()))
    return cards


def cmd_report(args) -> int:
    try:
        card_paths = sorted(Path(args.scorecards).glob("scorecard_*.json")) \
            if Path(args.scorecards).is_dir() else [args.scorecards]
        cards = _read_scorecards(card_paths)
        ratings, _ = _read_ratings(args.human)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _die(str(exc))

    models = [c["model"] for c in cards]
    missing = [m for m in models if m not in ratings]
    if missing:
        return _die(f"ratings missing for models: {missing}")
    if len(models) < 3:
        return _die(f"need >= 3 models for a correlation, got {len(models)}")

    overall = [c["overall"] for c in cards]
    human = [ratings[m] for m in models]
    try:
        r, rho = correlations(overall, human)
    except WowEvalError as exc:
        return _die(str(exc))

    out = Path(args.out)
    report = {
        "models": models,
        "overall": overall,
        "human": human,
        "pearson_r": r,
        "spearman_rho": rho,
    }

    if args.afc_log:
        responses = []
        with open(args.afc_log, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                if row:
                    responses.append((row[0], row[3].strip().lower()
                                      in ("1", "true", "yes")))
        ratios = deceive_ratio(responses)
        report["deceive_ratio"] = {m: ratios[m] for m in sorted(ratios)}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "deceive_ratio"])
        for m in sorted(ratios):
            writer.writerow([m, repr(ratios[m])])
        _write_text(out / "deceive_ratio.csv", buf.getvalue())

    _write_text(out / "report.json", _dump_json(report))
    _write_text(out / "scatter.svg",
                _scatter_svg(overall, human, models, r, rho,
                             "overall score", "human rating"))
    return 0


def cmd_correlate(args) -> int:
    try:
        xs, ys = [], []
        with open(args.table, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                if row:
                    xs.append(float(row[-2]))
                    ys.append(float(row[-1]))
        r, rho = correlations(xs, ys)
    except (OSError, ValueError, WowEvalError) as exc:
        return _die(str(exc))
    print(f"pearson_r={r!r} spearman_rho={rho!r}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except WowEvalError as exc:
        return _die(str(exc))
    base = Path(args.manifest).parent
    missing = []
    for sample in manifest.samples:
        for rel in sample.missing_paths(base):
            missing.append((sample.id, rel))
    if missing:
        for sid, rel in missing:
            print(f"error: sample {sid!r}: missing path {rel}", file=sys.stderr)
        return 2
    print(f"ok: {len(manifest.samples)} samples, "
          f"{len(manifest.models())} models")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wow-eval",
        description="Metric suite, scorecards and calibration for generated "
                    "robot-manipulation videos.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mappings", default=None,
                       help="mappings JSON file (default: shipped table)")
        p.add_argument("--seed", default=None,
                       help="deterministic seed (default: 0)")

    p = sub.add_parser("evaluate", help="score a manifest into scorecards")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--weights", default=None,
                   help="group weights, e.g. quality=1,physical=2 "
                        "(default: all 1)")
    p.add_argument("--jobs", default=None, help="worker count (default: 1)")
    p.add_argument("--metrics", default=None,
                   help="comma list of metrics to run (default: all)")
    p.add_argument("--format", default=None, choices=["csv", "json"],
                   help="leaderboard format (default: csv)")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="fit mapping parameters to ratings")
    p.add_argument("--metrics-table", required=True,
                   help="CSV (id, metric, raw value)")
    p.add_argument("--human", required=True, help="CSV (id, rating[, rater])")
    p.add_argument("--out", required=True)
    p.add_argument("--grid-max", default=None,
                   help="upper end of the parameter grid (default: 5.0)")
    p.add_argument("--grid-step", default=None,
                   help="grid step (default: 0.01)")
    p.add_argument("--folds", default=None,
                   help="cross-validation folds (default: 5)")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="human-alignment report and plots")
    p.add_argument("--scorecards", required=True,
                   help="directory of scorecard_*.json files")
    p.add_argument("--human", required=True,
                   help="CSV (model, rating[, rater])")
    p.add_argument("--afc-log", default=None,
                   help="CSV (model, sample_id, rater_id, judged_real)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("correlate", help="Pearson/Spearman of a 2-column CSV")
    p.add_argument("--table", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("validate", help="check manifest and artifact paths")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _config_overlay(args)
    except (OSError, json.JSONDecodeError) as exc:
        return _die(f"config file: {exc}")
    _apply_defaults(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
