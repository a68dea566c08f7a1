"""Synthetic panels drawn from a known linear conditional-quantile model."""
from __future__ import annotations

import numpy as np
from scipy import stats

from .panel import PanelDataset, PanelObservation

# sales = INTERCEPT + PRICE_COEF * price + GDP_COEF * gdp + NOISE_SD * eps
INTERCEPT = 160.0
PRICE_COEF = -15.0
GDP_COEF = 1.0
NOISE_SD = 12.0


def true_quantile(price, gdp, tau: float):
    """Conditional tau-quantile of sales under the generating model."""
    return INTERCEPT + PRICE_COEF * np.asarray(price) + GDP_COEF * np.asarray(gdp) + NOISE_SD * stats.norm.ppf(tau)


def synthetic_panel(
    n_regions: int = 20,
    n_years: int = 16,
    seed: int = 0,
    start_year: int = 2002,
    scale: dict | None = None,
) -> PanelDataset:
    """Draw a rectangular panel with iid Gaussian noise around a linear mean.

    Price trends upward over the years with small regional jitter; GDP has a
    regional level and mild growth. ``scale`` maps region name to a factor
    applied to its sales afterwards (planted anomalies).
    """
    rng = np.random.default_rng(seed)
    regions = [f"R{i:02d}" for i in range(1, n_regions + 1)]
    years = np.arange(start_year, start_year + n_years)
    base_price = np.linspace(2.0, 4.5, n_years)
    gdp_level = rng.uniform(17.0, 35.0, n_regions)
    scale = scale or {}
    obs = []
    for r, region in enumerate(regions):
        price = base_price + rng.normal(0.0, 0.05, n_years)
        gdp = gdp_level[r] * (1.0 + 0.01 * np.arange(n_years)) + rng.normal(0.0, 0.5, n_years)
        sales = INTERCEPT + PRICE_COEF * price + GDP_COEF * gdp + NOISE_SD * rng.standard_normal(n_years)
        sales = sales * scale.get(region, 1.0)
        for t, year in enumerate(years):
            obs.append(PanelObservation(region, int(year), float(sales[t]), float(price[t]), float(gdp[t])))
    return PanelDataset(tuple(obs))
