"""Command-line entry point: validate, describe, detect, evaluate, aggregate."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .forest import ForestConfig
from .intervals import Method, ModelPathologyError, TauPair, run_detection
from .evaluation import run_evaluation
from .panel import PanelValidationError, describe, read_panel, write_stats
from .reporting import (
    aggregate_annual,
    emit_report,
    metric_rows,
    metrics_to_csv,
    metrics_to_json,
    read_classification,
    records_from_csv,
    records_from_json,
    split_uar_by_class,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PATHOLOGY = 3
EXIT_IO = 4


def _forest_config(args) -> ForestConfig:
    return ForestConfig(
        n_trees=args.n_trees, mtry=args.mtry, min_node_size=args.min_node_size, seed=args.seed
    )


def cmd_validate(args) -> int:
    d = read_panel(args.input)
    print(f"ok: {len(d.regions)} regions x {len(d.years)} years ({d.years[0]}-{d.years[-1]}), {len(d)} rows")
    return EXIT_OK


def cmd_describe(args) -> int:
    stats = describe(read_panel(args.input))
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        write_stats(stats, fh)
    return EXIT_OK


def cmd_detect(args) -> int:
    d = read_panel(args.input)
    taus = TauPair(args.tau_low, args.tau_high)
    cfg = _forest_config(args) if args.method == "qrf" else None
    records = run_detection(d, args.method, taus, cfg, n_jobs=args.jobs)
    aggregates = aggregate_annual(records, include_all=args.include_all)
    class_split = None
    if args.classes:
        class_split = split_uar_by_class(records, read_classification(args.classes), args.include_all)
    emit_report(args.output_dir, records, aggregates, class_split, fmt=args.format)
    n_high = sum(r.anomaly_class.value == "High" for r in records)
    n_low = sum(r.anomaly_class.value == "Low" for r in records)
    n_rep = sum(r.interval.crossing_repaired for r in records)
    print(f"{len(records)} cells: {n_high} High, {n_low} Low, {n_rep} crossing-repaired intervals")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    d = read_panel(args.input)
    taus = TauPair(args.tau_low, args.tau_high)
    cfg = _forest_config(args) if args.method == "qrf" else None
    per_fold, averages = run_evaluation(d, args.method, taus, args.alpha, cfg, n_jobs=args.jobs)
    rows = metric_rows(args.method, per_fold, averages)
    out = Path(args.output)
    text = metrics_to_json(rows) if out.suffix == ".json" else metrics_to_csv(rows)
    out.write_text(text, encoding="utf-8", newline="")
    for split, values in averages.items():
        shown = ", ".join(f"{k}={v:.4g}" for k, v in values.items() if v is not None)
        print(f"{split}: {shown}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    text = Path(args.records).read_text(encoding="utf-8")
    records = records_from_json(text) if args.records.endswith(".json") else records_from_csv(text)
    aggregates = aggregate_annual(records, include_all=args.include_all)
    class_split = split_uar_by_class(records, read_classification(args.classes), args.include_all)
    emit_report(args.output_dir, aggregates=aggregates, class_split=class_split, fmt=args.format)
    return EXIT_OK


def _add_model_args(p):
    p.add_argument("--method", choices=[m.value for m in Method], default="qr")
    p.add_argument("--tau-low", type=float, default=0.1)
    p.add_argument("--tau-high", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1, help="parallel LOGO folds (-1 = all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sales-anomaly", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a panel CSV")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("describe", help="per-region descriptive statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("detect", help="leave-one-region-out anomaly detection")
    p.add_argument("--input", required=True)
    _add_model_args(p)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--classes", help="optional region,class CSV for the class-split UAR series")
    p.add_argument("--include-all", action="store_true", help="average ratios over all records, not only anomalies")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="point and interval metrics per LOGO fold")
    p.add_argument("--input", required=True)
    _add_model_args(p)
    p.add_argument("--alpha", type=float, default=None, help="interval score level (default 1 - nominal coverage)")
    p.add_argument("--output", required=True, help=".csv or .json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("aggregate", help="annual and class-split series from a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--include-all", action="store_true")
    p.set_defaults(func=cmd_aggregate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PanelValidationError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ModelPathologyError as exc:
        print(f"model pathology: {exc}", file=sys.stderr)
        return EXIT_PATHOLOGY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
