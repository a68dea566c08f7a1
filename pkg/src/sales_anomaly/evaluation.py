"""Per-fold point and interval accuracy under leave-one-region-out."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .forest import ForestConfig
from .intervals import Method, TauPair, fit_quantile_predictor, logo_split
from .metrics import interval_metrics, point_metrics
from .panel import PanelDataset

SPLITS = ("train", "test")


@dataclass(frozen=True)
class FoldMetrics:
    region: str
    split: str
    values: dict  # metric name -> float or None

    @property
    def label(self) -> str:
        return f"{self.split}:{self.region}"


def _fold(d: PanelDataset, region, method, taus, alpha, forest_config):
    train, test = logo_split(d, region)
    X, y = d.arrays(train)
    predict = fit_quantile_predictor(X, y, method, [taus.low, 0.5, taus.high], forest_config)
    out = []
    for split, rows in zip(SPLITS, (train, test)):
        Xs, ys = d.arrays(rows)
        q = predict(Xs)
        lower, upper = np.minimum(q[:, 0], q[:, 2]), np.maximum(q[:, 0], q[:, 2])
        values = point_metrics(ys, q[:, 1]).as_dict()
        values.pop("n")
        im = interval_metrics(ys, lower, upper, alpha, taus).as_dict()
        im.pop("n")
        im.pop("alpha")
        values.update(im)
        out.append(FoldMetrics(region, split, values))
    return out


def run_evaluation(
    d: PanelDataset,
    method: Method | str = Method.QR,
    taus: TauPair = TauPair(),
    alpha: float | None = None,
    forest_config: ForestConfig | None = None,
    n_jobs: int | None = None,
) -> tuple[list[FoldMetrics], dict]:
    """Score median point forecasts and intervals on every fold.

    Point forecasts are the conditional 0.5-quantile. ``alpha`` defaults to
    ``1 - (tau_high - tau_low)``. Returns the per-fold metrics and, per split,
    the average of each metric over folds (undefined values skipped).
    """
    method = Method(method)
    alpha = 1.0 - taus.coverage if alpha is None else alpha
    if method is Method.QRF and forest_config is None:
        forest_config = ForestConfig()
    args = (method, taus, alpha, forest_config)
    if n_jobs in (None, 1):
        folds = [_fold(d, r, *args) for r in d.regions]
    else:
        folds = Parallel(n_jobs=n_jobs)(delayed(_fold)(d, r, *args) for r in d.regions)
    per_fold = [fm for fold in folds for fm in fold]

    averages = {}
    for split in SPLITS:
        rows = [fm.values for fm in per_fold if fm.split == split]
        avg = {}
        for key in rows[0]:
            vals = [r[key] for r in rows if r[key] is not None]
            avg[key] = float(np.mean(vals)) if vals else None
        averages[split] = avg
    return per_fold, averages
