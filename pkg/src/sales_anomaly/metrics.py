"""Point-forecast error metrics and prediction-interval scores."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .qr import pinball_loss


@dataclass(frozen=True)
class PointMetrics:
    mae: float
    mse: float
    mape: float | None  # None when some observation is zero
    medae: float
    medse: float
    medape: float | None
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IntervalMetrics:
    mis: float
    coverage: float  # percent of observations inside [lower, upper]
    range_width: float
    range_ratio: float | None  # None unless every lower bound is positive
    pinball_lo: float
    pinball_hi: float
    pinball_lo_sum: float
    pinball_hi_sum: float
    alpha: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def _paired(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if len(y) != len(yhat):
        raise ValueError(f"length mismatch: {len(y)} vs {len(yhat)}")
    if len(y) == 0:
        raise ValueError("metrics need at least one observation")
    return y, yhat


def point_metrics(y, yhat) -> PointMetrics:
    """MAE, MSE, MAPE and their median counterparts for ``e = y - yhat``.

    Medians of even-length inputs average the two middle order statistics.
    """
    y, yhat = _paired(y, yhat)
    e = y - yhat
    ae = np.abs(e)
    se = e**2
    if np.all(y != 0):
        with np.errstate(over="ignore"):
            ape = np.abs(e / y)
        mape, medape = float(np.mean(ape)), float(np.median(ape))
    else:
        mape = medape = None
    return PointMetrics(
        mae=float(np.mean(ae)),
        mse=float(np.mean(se)),
        mape=mape,
        medae=float(np.median(ae)),
        medse=float(np.median(se)),
        medape=medape,
        n=len(y),
    )


def interval_score(y, lower, upper, alpha: float) -> np.ndarray:
    """Per-observation interval score: width plus 2/alpha times each exceedance."""
    y = np.asarray(y, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    below = np.where(y < lower, lower - y, 0.0)
    above = np.where(y > upper, y - upper, 0.0)
    return (upper - lower) + (2.0 / alpha) * below + (2.0 / alpha) * above


def interval_metrics(y, lower, upper, alpha: float = 0.2, taus=(0.1, 0.9)) -> IntervalMetrics:
    """Score a set of prediction intervals against observations.

    ``taus`` are the quantile levels of the lower and upper bound, used for
    their pinball losses (a ``TauPair`` works too).
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    tau_lo, tau_hi = (taus.low, taus.high) if hasattr(taus, "low") else taus
    y, lower = _paired(y, lower)
    _, upper = _paired(y, upper)
    if np.any(lower > upper):
        raise ValueError("every lower bound must be <= its upper bound")
    inside = (lower <= y) & (y <= upper)
    pin_lo = pinball_loss(y, lower, tau_lo)
    pin_hi = pinball_loss(y, upper, tau_hi)
    return IntervalMetrics(
        mis=float(np.mean(interval_score(y, lower, upper, alpha))),
        coverage=100.0 * float(np.mean(inside)),
        range_width=float(np.mean(upper - lower)),
        range_ratio=float(np.mean(upper / lower)) if np.all(lower > 0) else None,
        pinball_lo=float(np.mean(pin_lo)),
        pinball_hi=float(np.mean(pin_hi)),
        pinball_lo_sum=float(np.sum(pin_lo)),
        pinball_hi_sum=float(np.sum(pin_hi)),
        alpha=float(alpha),
        n=len(y),
    )
