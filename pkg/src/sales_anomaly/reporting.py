"""Annual aggregation of anomaly records and report writers."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .intervals import RECORD_FIELDS, AnomalyClass, AnomalyRecord, PredictionInterval, TauPair

ANNUAL_FIELDS = ("year", "avg_uar", "avg_lar_magnitude", "n_high", "n_low")
CLASS_SPLIT_FIELDS = ("class", "year", "avg_uar", "n_high")
METRIC_FIELDS = ("model", "split", "metric", "value")


class RegionClass(str, Enum):
    CROSSBORDER_HIGH = "crossborder_high"
    CROSSBORDER_LOW = "crossborder_low"
    TOURISTIC = "touristic"
    INTERIOR = "interior"


@dataclass(frozen=True)
class RegionClassification:
    classes: dict  # region -> RegionClass
    provenance: str = ""

    def __getitem__(self, region: str) -> RegionClass:
        try:
            return self.classes[region]
        except KeyError:
            raise KeyError(f"region {region!r} is not classified in {self.provenance or 'classification'}") from None


@dataclass(frozen=True)
class AnnualAggregate:
    year: int
    avg_uar: float | None
    avg_lar_magnitude: float | None
    n_high: int
    n_low: int

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in ANNUAL_FIELDS}


def read_classification(path) -> RegionClassification:
    classes = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["region", "class"]:
            raise ValueError(f"{path}: header must be region,class")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {reader.line_num}: expected 2 columns")
            region, cls = row[0].strip(), row[1].strip()
            if region in classes:
                raise ValueError(f"{path}: region {region!r} classified twice")
            try:
                classes[region] = RegionClass(cls)
            except ValueError:
                raise ValueError(f"{path}: line {reader.line_num}: unknown class {cls!r}") from None
    return RegionClassification(classes, str(path))


def aggregate_annual(records, include_all: bool = False) -> list[AnnualAggregate]:
    """Average UAR over High records and |LAR| over Low records, per year.

    With ``include_all`` the averages run over every record of the year,
    non-anomalous ones contributing zero.
    """
    records = list(records)
    if not records:
        raise ValueError("no anomaly records to aggregate")
    out = []
    for year in sorted({r.year for r in records}):
        rows = [r for r in records if r.year == year]
        high = [r.uar for r in rows if r.anomaly_class is AnomalyClass.HIGH]
        low = [abs(r.lar) for r in rows if r.anomaly_class is AnomalyClass.LOW]
        if include_all:
            avg_uar = float(np.sum(sorted(high))) / len(rows)
            avg_lar = float(np.sum(sorted(low))) / len(rows)
        else:
            # sorted so the float sum does not depend on record order
            avg_uar = float(np.mean(sorted(high))) if high else None
            avg_lar = float(np.mean(sorted(low))) if low else None
        out.append(AnnualAggregate(year, avg_uar, avg_lar, len(high), len(low)))
    return out


def split_uar_by_class(records, classification: RegionClassification, include_all: bool = False) -> dict:
    """Annual UAR series for touristic and crossborder-high regions."""
    records = list(records)
    by_class = {RegionClass.TOURISTIC: [], RegionClass.CROSSBORDER_HIGH: []}
    for r in records:
        cls = classification[r.region]
        if cls in by_class:
            by_class[cls].append(r)
    years = sorted({r.year for r in records})
    out = {}
    for cls, recs in by_class.items():
        agg = {a.year: a for a in aggregate_annual(recs, include_all)} if recs else {}
        out[cls] = [agg.get(y, AnnualAggregate(y, None, None, 0, 0)) for y in years]
    return out


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def records_to_csv(records) -> str:
    return _csv_text(RECORD_FIELDS, [r.as_row() for r in records])


def records_from_csv(text: str) -> list[AnomalyRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
        raise ValueError(f"records header must be {','.join(RECORD_FIELDS)}")
    return [_record_from_row(row) for row in reader]


def records_from_json(text: str) -> list[AnomalyRecord]:
    return [_record_from_row(row) for row in json.loads(text)]


def _record_from_row(row: dict) -> AnomalyRecord:
    repaired = row["crossing_repaired"]
    if isinstance(repaired, str):
        repaired = repaired.strip().lower() == "true"
    taus = TauPair(float(row["tau_low"]), float(row["tau_high"]))
    pi = PredictionInterval(
        row["region"], int(row["year"]), float(row["lower"]), float(row["upper"]), taus, bool(repaired)
    )
    return AnomalyRecord(
        row["region"], int(row["year"]), float(row["observed"]), pi,
        AnomalyClass(row["class"]), float(row["uar"]), float(row["lar"]),
    )


def metric_rows(model: str, per_fold, averages: dict) -> list[dict]:
    """Long-format metric rows: averages first (split = train/test), then folds."""
    rows = []
    for split, values in averages.items():
        rows += [{"model": model, "split": split, "metric": k, "value": v} for k, v in values.items()]
    for fm in per_fold:
        rows += [{"model": model, "split": fm.label, "metric": k, "value": v} for k, v in fm.values.items()]
    return rows


def metrics_to_csv(rows) -> str:
    return _csv_text(METRIC_FIELDS, rows)


def metrics_to_json(rows) -> str:
    """JSON object keyed by split, then metric name."""
    obj = {}
    for r in rows:
        obj.setdefault(r["model"], {}).setdefault(r["split"], {})[r["metric"]] = r["value"]
    return _json_text(obj)


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_report(
    out_dir,
    records=None,
    aggregates=None,
    class_split: dict | None = None,
    metrics: list[dict] | None = None,
    fmt: str = "csv",
) -> list[Path]:
    """Write whichever report tables are given; return the written paths.

    Files: ``records``, ``annual``, ``class_split`` and ``metrics`` with the
    extension of ``fmt``. Contents depend only on the inputs.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc
    written = []
    if records is not None:
        rows = [r.as_row() for r in records]
        text = _csv_text(RECORD_FIELDS, rows) if fmt == "csv" else _json_text(rows)
        written.append(_write(out_dir / f"records.{fmt}", text))
    if aggregates is not None:
        rows = [a.as_row() for a in aggregates]
        text = _csv_text(ANNUAL_FIELDS, rows) if fmt == "csv" else _json_text(rows)
        written.append(_write(out_dir / f"annual.{fmt}", text))
    if class_split is not None:
        rows = [
            {"class": cls.value, "year": a.year, "avg_uar": a.avg_uar, "n_high": a.n_high}
            for cls, series in class_split.items()
            for a in series
        ]
        text = _csv_text(CLASS_SPLIT_FIELDS, rows) if fmt == "csv" else _json_text(rows)
        written.append(_write(out_dir / f"class_split.{fmt}", text))
    if metrics is not None:
        text = metrics_to_csv(metrics) if fmt == "csv" else metrics_to_json(metrics)
        written.append(_write(out_dir / f"metrics.{fmt}", text))
    return written
