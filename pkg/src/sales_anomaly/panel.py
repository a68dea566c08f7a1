"""Regional panel ingestion, validation and descriptive statistics.

The canonical input is a CSV with the exact header
``region,year,sales_pc,price,gdp_pc`` and one row per (region, year).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

HEADER = ("region", "year", "sales_pc", "price", "gdp_pc")
STATS_HEADER = ("region", "variable", "n", "mean", "sd", "q1", "q2", "q3")
VARIABLES = ("sales_pc", "price", "gdp_pc")


class PanelValidationError(ValueError):
    """Raised when a panel file or dataset violates the input contract.

    ``errors`` holds every problem found, one human-readable string each.
    """

    def __init__(self, errors: Iterable[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PanelObservation:
    region: str
    year: int
    sales_pc: float
    price: float
    gdp_pc: float


@dataclass(frozen=True)
class PanelDataset:
    """Validated rectangular panel, observations sorted by (region, year)."""

    observations: tuple[PanelObservation, ...]
    regions: tuple[str, ...] = field(init=False)
    years: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        obs = tuple(sorted(self.observations, key=lambda o: (o.region, o.year)))
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "regions", tuple(sorted({o.region for o in obs})))
        object.__setattr__(self, "years", tuple(sorted({o.year for o in obs})))
        errors = _structural_errors(obs, self.regions, self.years)
        if errors:
            raise PanelValidationError(errors)

    def __len__(self) -> int:
        return len(self.observations)

    def rows(self, region: str | None = None) -> list[PanelObservation]:
        if region is None:
            return list(self.observations)
        return [o for o in self.observations if o.region == region]

    def arrays(self, rows: Iterable[PanelObservation] | None = None):
        """Return ``(X, y)`` with X columns (price, gdp_pc) and y = sales_pc."""
        rows = self.observations if rows is None else list(rows)
        X = np.array([[o.price, o.gdp_pc] for o in rows], dtype=float).reshape(-1, 2)
        y = np.array([o.sales_pc for o in rows], dtype=float)
        return X, y


@dataclass(frozen=True)
class DescriptiveStats:
    region: str
    n_years: int
    # variable name -> dict with mean, sd, q1, q2, q3
    stats: dict


def _structural_errors(obs, regions, years) -> list[str]:
    errors = []
    seen = set()
    for o in obs:
        key = (o.region, o.year)
        if key in seen:
            errors.append(f"duplicate (region, year) pair: ({o.region}, {o.year})")
        seen.add(key)
    missing = [
        f"({r}, {y})" for r in regions for y in years if (r, y) not in seen
    ]
    if missing:
        errors.append("panel is not rectangular; missing cells: " + ", ".join(missing))
    return errors


def _field_errors(o: PanelObservation, year_range: tuple[int, int]) -> list[str]:
    errors = []
    for name in VARIABLES:
        if not math.isfinite(getattr(o, name)):
            errors.append(f"{name} is not finite")
    if o.sales_pc < 0:
        errors.append("sales_pc must be >= 0")
    if not o.price > 0:
        errors.append("price must be > 0")
    if not o.gdp_pc > 0:
        errors.append("gdp_pc must be > 0")
    lo, hi = year_range
    if not lo <= o.year <= hi:
        errors.append(f"year must lie in [{lo}, {hi}]")
    return errors


def parse_panel(source: TextIO | str, year_range: tuple[int, int] = (1900, 2100)) -> PanelDataset:
    """Parse and validate a panel CSV.

    Parameters
    ----------
    source : text stream or str
        CSV content. A ``str`` is treated as the file contents, not a path.
    year_range : (int, int)
        Inclusive bounds on the year column.

    Raises
    ------
    PanelValidationError
        With every malformed row, bound violation, duplicate pair and missing
        cell found.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise PanelValidationError([f"line 1: header must be {','.join(HEADER)}, got {header}"])

    errors = []
    obs = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            errors.append(f"line {lineno}: expected {len(HEADER)} columns, got {len(row)}")
            continue
        region = row[0].strip()
        if not region:
            errors.append(f"line {lineno}: empty region")
            continue
        try:
            year = int(row[1])
            values = [float(c) for c in row[2:]]
        except ValueError as exc:
            errors.append(f"line {lineno}: unparseable number ({exc})")
            continue
        o = PanelObservation(region, year, *values)
        errors.extend(f"line {lineno}: {e}" for e in _field_errors(o, year_range))
        obs.append(o)

    if errors:
        raise PanelValidationError(errors)
    if not obs:
        raise PanelValidationError(["no data rows"])
    return PanelDataset(tuple(obs))


def read_panel(path, year_range: tuple[int, int] = (1900, 2100)) -> PanelDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_panel(fh, year_range)


def write_panel(d: PanelDataset, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(HEADER)
    for o in d.observations:
        w.writerow([o.region, o.year, repr(o.sales_pc), repr(o.price), repr(o.gdp_pc)])


def quartiles(values) -> tuple[float, float, float]:
    # Linear interpolation between order statistics, h = (n - 1) p + 1.
    q = np.quantile(np.asarray(values, dtype=float), [0.25, 0.5, 0.75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def describe(d: PanelDataset) -> list[DescriptiveStats]:
    """Per-region mean, sample SD and quartiles of each variable."""
    out = []
    for region in d.regions:
        rows = d.rows(region)
        stats = {}
        for name in VARIABLES:
            v = np.array([getattr(o, name) for o in rows], dtype=float)
            if np.all(v == v[0]):
                # summation rounding would otherwise leak into a constant series
                mean, sd = float(v[0]), 0.0
            else:
                mean, sd = float(np.mean(v)), float(np.std(v, ddof=1))
            q1, q2, q3 = quartiles(v)
            stats[name] = {"mean": mean, "sd": sd, "q1": q1, "q2": q2, "q3": q3}
        out.append(DescriptiveStats(region, len(rows), stats))
    return out


def write_stats(stats: list[DescriptiveStats], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for s in stats:
        for name in VARIABLES:
            v = s.stats[name]
            w.writerow([s.region, name, s.n_years] + [repr(v[k]) for k in ("mean", "sd", "q1", "q2", "q3")])
