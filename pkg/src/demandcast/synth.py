"""Deterministic synthetic daily demand, used by the demos and the test suite.

Real multi-year city demand records cannot ship with the repository, so
desk-scale runs use a surrogate with the same gross structure: an annual
cycle, a weekly cycle, a slow trend, and noise, affinely mapped into a
realistic MW band.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .data import OBSERVED, TimeSeries
from .errors import DataError


def synthetic_demand_series(n_days: int = 2190, start: date = date(2016, 1, 1),
                            low: float = 2900.0, high: float = 3700.0,
                            seed: int = 7, noise: float = 0.05) -> TimeSeries:
    """Sine (period 365) + weekly sine + linear trend + seeded noise,
    amplitude-scaled so the series spans exactly [low, high] MW.
    """
    if n_days < 2:
        raise DataError(f"need at least 2 days, got {n_days}")
    if not high > low:
        raise DataError(f"need high > low, got {low}..{high}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_days, dtype=np.float64)
    raw = (np.sin(2.0 * np.pi * t / 365.0)
           + 0.3 * np.sin(2.0 * np.pi * t / 7.0)
           + 0.4 * t / n_days
           + noise * rng.standard_normal(n_days))
    scaled = low + (raw - raw.min()) * (high - low) / (raw.max() - raw.min())
    dates = [start + timedelta(days=int(i)) for i in range(n_days)]
    return TimeSeries(dates, scaled, np.full(n_days, OBSERVED, dtype=np.int8))
