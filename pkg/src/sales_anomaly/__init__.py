"""Anomaly detection and quantification in regional panel sales data.

Conditional 0.1/0.9 quantiles from linear quantile regression or a quantile
regression forest, fitted leave-one-region-out, bracket each observed value;
values outside the interval are flagged High or Low and quantified by their
relative distance to the violated bound.
"""
from .evaluation import run_evaluation
from .forest import ForestConfig, QuantileForest, fit_forest, forest_weights, predict_forest_quantile
from .intervals import (
    AnomalyClass,
    AnomalyRecord,
    Method,
    ModelPathologyError,
    PredictionInterval,
    TauPair,
    build_interval,
    classify_and_quantify,
    logo_split,
    run_detection,
)
from .metrics import IntervalMetrics, PointMetrics, interval_metrics, point_metrics
from .panel import PanelDataset, PanelObservation, PanelValidationError, describe, parse_panel, read_panel
from .qr import QrModel, fit_qr, pinball_loss, predict_qr
from .reporting import RegionClass, RegionClassification, aggregate_annual, emit_report, split_uar_by_class

__version__ = "0.1.0"
