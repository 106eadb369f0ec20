import numpy as np
import pytest

from demandcast.data import OBSERVED, TimeSeries


@pytest.fixture
def series_factory():
    """Build a fully observed daily series from raw values."""
    from datetime import date, timedelta

    def build(values, start=date(2020, 1, 1), flags=None):
        values = np.asarray(values, dtype=np.float64)
        dates = [start + timedelta(days=i) for i in range(len(values))]
        if flags is None:
            flags = np.full(len(values), OBSERVED, dtype=np.int8)
        return TimeSeries(dates, values, np.asarray(flags, dtype=np.int8))

    return build
