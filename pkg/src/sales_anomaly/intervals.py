"""Leave-one-region-out prediction intervals and anomaly classification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from .forest import ForestConfig, fit_forest
from .panel import PanelDataset
from .qr import check_tau, fit_qr

RECORD_FIELDS = (
    "region", "year", "observed", "lower", "upper", "tau_low", "tau_high",
    "class", "uar", "lar", "crossing_repaired",
)


class ModelPathologyError(RuntimeError):
    """A fitted model produced an interval the anomaly ratios cannot use."""


class AnomalyClass(str, Enum):
    NORMAL = "Normal"
    HIGH = "High"
    LOW = "Low"


class Method(str, Enum):
    QR = "qr"
    QRF = "qrf"


@dataclass(frozen=True)
class TauPair:
    low: float = 0.1
    high: float = 0.9

    def __post_init__(self):
        check_tau(self.low)
        check_tau(self.high)
        if not self.low < self.high:
            raise ValueError(f"tau_low ({self.low}) must be below tau_high ({self.high})")
        if abs(self.low + self.high - 1.0) > 1e-12:
            raise ValueError(f"quantile levels must be symmetric, got {self.low} and {self.high}")

    @property
    def coverage(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class PredictionInterval:
    region: str
    year: int
    lower: float
    upper: float
    taus: TauPair
    crossing_repaired: bool = False


@dataclass(frozen=True)
class AnomalyRecord:
    region: str
    year: int
    observed: float
    interval: PredictionInterval
    anomaly_class: AnomalyClass
    uar: float
    lar: float

    def as_row(self) -> dict:
        return {
            "region": self.region,
            "year": self.year,
            "observed": self.observed,
            "lower": self.interval.lower,
            "upper": self.interval.upper,
            "tau_low": self.interval.taus.low,
            "tau_high": self.interval.taus.high,
            "class": self.anomaly_class.value,
            "uar": self.uar,
            "lar": self.lar,
            "crossing_repaired": self.interval.crossing_repaired,
        }


def logo_split(d: PanelDataset, region: str):
    """Hold out every year of ``region``; train on all other regions."""
    if region not in d.regions:
        raise KeyError(f"unknown region: {region!r}")
    if len(d.regions) < 2:
        raise ValueError("leave-one-region-out needs at least 2 regions")
    train = [o for o in d.observations if o.region != region]
    test = [o for o in d.observations if o.region == region]
    return train, test


def build_interval(lo_pred: float, hi_pred: float, taus: TauPair, region: str = "", year: int = 0) -> PredictionInterval:
    """Pair two quantile predictions into an interval, swapping crossed bounds."""
    lo, hi = float(lo_pred), float(hi_pred)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ModelPathologyError(f"non-finite interval bound for ({region}, {year})")
    repaired = lo > hi
    if repaired:
        lo, hi = hi, lo
    return PredictionInterval(region, year, lo, hi, taus, repaired)


def anomaly_ratios(observed: float, lower: float, upper: float) -> tuple[float, float]:
    """Return (UAR, LAR) relative to the upper and lower bounds."""
    return (observed - upper) / upper, (observed - lower) / lower


def classify_and_quantify(observed: float, pi: PredictionInterval) -> AnomalyRecord:
    if not (pi.lower > 0 and pi.upper > 0):
        raise ModelPathologyError(
            f"non-positive interval bound ({pi.lower}, {pi.upper}) for ({pi.region}, {pi.year})"
        )
    observed = float(observed)
    if observed > pi.upper:
        cls = AnomalyClass.HIGH
    elif observed < pi.lower:
        cls = AnomalyClass.LOW
    else:
        cls = AnomalyClass.NORMAL
    uar, lar = anomaly_ratios(observed, pi.lower, pi.upper)
    return AnomalyRecord(pi.region, pi.year, observed, pi, cls, uar, lar)


def fit_quantile_predictor(X, y, method: Method, taus, forest_config: ForestConfig | None = None):
    """Fit models for every level in ``taus``; return ``predict(X) -> (m, len(taus))``.

    QR fits one model per level. QRF grows a single forest and reads all
    levels off the same weighted CDF.
    """
    method = Method(method)
    taus = list(taus)
    if method is Method.QR:
        models = [fit_qr(X, y, t) for t in taus]
        return lambda Z: np.column_stack([m.predict(Z) for m in models])
    forest = fit_forest(X, y, forest_config or ForestConfig())
    return lambda Z: forest.predict_quantiles(Z, taus)


def _run_fold(d: PanelDataset, region: str, method: Method, taus: TauPair, forest_config):
    train, test = logo_split(d, region)
    X, y = d.arrays(train)
    Xt, yt = d.arrays(test)
    predict = fit_quantile_predictor(X, y, method, [taus.low, taus.high], forest_config)
    bounds = predict(Xt)
    records = []
    for o, (lo, hi) in zip(test, bounds):
        pi = build_interval(lo, hi, taus, o.region, o.year)
        records.append(classify_and_quantify(o.sales_pc, pi))
    return records


def run_detection(
    d: PanelDataset,
    method: Method | str = Method.QR,
    taus: TauPair = TauPair(),
    forest_config: ForestConfig | None = None,
    n_jobs: int | None = None,
) -> list[AnomalyRecord]:
    """Leave-one-region-out anomaly detection over the whole panel.

    Returns one record per (region, year), sorted by region then year.
    Folds run in parallel when ``n_jobs`` is not None/1; output is identical
    either way.
    """
    method = Method(method)
    if method is Method.QRF and forest_config is None:
        forest_config = ForestConfig()
    if n_jobs in (None, 1):
        folds = [_run_fold(d, r, method, taus, forest_config) for r in d.regions]
    else:
        folds = Parallel(n_jobs=n_jobs)(
            delayed(_run_fold)(d, r, method, taus, forest_config) for r in d.regions
        )
    records = [rec for fold in folds for rec in fold]
    records.sort(key=lambda r: (r.region, r.year))
    return records
