"""Daily demand series: CSV ingestion, validation, imputation, scaling, windowing.

Every numeric value is carried as float64. A series always spans a contiguous
daily date range; days that were absent from the source file are materialized
as missing points so that positions double as day offsets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import DataError

# Per-point validity flags.
OBSERVED = 0
MISSING = 1
INVALID = 2

EXPECTED_HEADER = ("date", "demand_mw")


@dataclass
class TimeSeries:
    """Dated demand observations (MW) with a per-point validity flag.

    ``values[i]`` is NaN when no usable number exists for ``dates[i]``
    (missing cell, absent row, or unparseable text).
    """

    dates: list[date]
    values: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.flags = np.asarray(self.flags, dtype=np.int8)
        if not (len(self.dates) == len(self.values) == len(self.flags)):
            raise DataError("dates, values and flags must have equal lengths")
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise DataError(f"dates must advance by exactly one day, got {a} -> {b}")

    def __len__(self):
        return len(self.dates)

    def take(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.dates[start:stop], self.values[start:stop].copy(),
                          self.flags[start:stop].copy())

    def fully_observed(self) -> bool:
        return bool(np.all(self.flags == OBSERVED))


def load_csv(path) -> TimeSeries:
    """Read a ``date,demand_mw`` CSV into a gap-materialized TimeSeries.

    Empty demand cells and dates absent within the span become MISSING;
    cells that fail to parse as a finite number become INVALID. A third
    ``imputed`` column (as written by preprocessing) is tolerated and ignored.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            header = [h.strip().lower() for h in header]
            if tuple(header[:2]) != EXPECTED_HEADER:
                raise DataError(f"{path}: expected header 'date,demand_mw', got {','.join(header)}")
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    by_date: dict[date, tuple[float, int]] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise DataError(f"{path}:{lineno}: expected at least 2 columns")
        try:
            day = date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}: {exc}") from exc
        if day in by_date:
            raise DataError(f"{path}:{lineno}: duplicate date {day.isoformat()}")
        cell = row[1].strip()
        if not cell:
            by_date[day] = (math.nan, MISSING)
        else:
            try:
                value = float(cell)
            except ValueError:
                by_date[day] = (math.nan, INVALID)
            else:
                if math.isfinite(value):
                    by_date[day] = (value, OBSERVED)
                else:
                    by_date[day] = (math.nan, INVALID)

    if not by_date:
        raise DataError(f"{path}: no data rows")

    first, last = min(by_date), max(by_date)
    n = (last - first).days + 1
    dates = [first + timedelta(days=i) for i in range(n)]
    values = np.full(n, math.nan)
    flags = np.full(n, MISSING, dtype=np.int8)
    for i, day in enumerate(dates):
        if day in by_date:
            values[i], flags[i] = by_date[day]
    return TimeSeries(dates, values, flags)


def write_csv(series: TimeSeries, path, imputed=None) -> None:
    """Write a series as ``date,demand_mw`` CSV, plus an ``imputed`` column when given."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if imputed is None:
            writer.writerow(EXPECTED_HEADER)
            for day, value, flag in zip(series.dates, series.values, series.flags):
                cell = "" if flag == MISSING or not math.isfinite(value) else repr(float(value))
                writer.writerow([day.isoformat(), cell])
        else:
            writer.writerow(EXPECTED_HEADER + ("imputed",))
            for day, value, imp in zip(series.dates, series.values, imputed):
                writer.writerow([day.isoformat(), repr(float(value)), int(imp)])


def validate(series: TimeSeries, max_mw: float) -> tuple[TimeSeries, int]:
    """Re-flag observed points outside (0, max_mw] as INVALID.

    A city's demand is strictly positive and bounded; anything else is
    treated as a recording error. Returns the re-flagged series and the
    number of newly flagged points.
    """
    if max_mw <= 0:
        raise DataError(f"max_mw must be positive, got {max_mw}")
    flags = series.flags.copy()
    observed = flags == OBSERVED
    bad = observed & ((series.values <= 0.0) | (series.values > max_mw))
    flags[bad] = INVALID
    count = int(bad.sum())
    return TimeSeries(series.dates, series.values.copy(), flags), count


def interpolate_missing(series: TimeSeries) -> TimeSeries:
    """Fill every non-observed point by linear interpolation between the
    nearest observed neighbors; boundary gaps take the nearest observed value.

    All flags become OBSERVED. Requires at least two observed points.
    """
    obs = series.flags == OBSERVED
    n_obs = int(obs.sum())
    if n_obs == 0:
        raise DataError("cannot interpolate: series has no observed points")
    if n_obs < 2:
        raise DataError(f"cannot interpolate: need at least 2 observed points, have {n_obs}")
    gaps = ~obs
    values = series.values.copy()
    if gaps.any():
        positions = np.arange(len(series), dtype=np.float64)
        values[gaps] = np.interp(positions[gaps], positions[obs], series.values[obs])
    flags = np.full(len(series), OBSERVED, dtype=np.int8)
    return TimeSeries(series.dates, values, flags)


def chronological_split(series: TimeSeries, ratio: float,
                        min_points: int = 1) -> tuple[TimeSeries, TimeSeries]:
    """Split into (first floor(ratio*L) points, remainder) with no shuffling.

    ``min_points`` lets callers enforce the downstream framing minimum
    (W + h) on both sides.
    """
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must be in (0, 1), got {ratio}")
    if not series.fully_observed():
        raise DataError("cannot split a series that still has gaps; impute first")
    cut = int(math.floor(ratio * len(series)))
    train, test = series.take(0, cut), series.take(cut, len(series))
    for name, part in (("train", train), ("test", test)):
        if len(part) < min_points:
            raise DataError(
                f"{name} split has {len(part)} points but at least {min_points} are required")
    return train, test


@dataclass(frozen=True)
class Scaler:
    """Min-max scaler mapping the training value range onto [0, 1]."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DataError(f"degenerate scaler range: x_min={self.x_min}, x_max={self.x_max}")

    def transform(self, x):
        """(x - x_min) / (x_max - x_min); out-of-range inputs are not clipped."""
        return (np.asarray(x, dtype=np.float64) - self.x_min) / (self.x_max - self.x_min)

    def inverse_transform(self, s):
        """s * (x_max - x_min) + x_min."""
        return np.asarray(s, dtype=np.float64) * (self.x_max - self.x_min) + self.x_min


def fit_scaler(train: TimeSeries) -> Scaler:
    """Fit min/max on the training split only (no test leakage)."""
    if len(train) == 0:
        raise DataError("cannot fit scaler on an empty series")
    return Scaler(float(train.values.min()), float(train.values.max()))


@dataclass
class WindowedDataset:
    """Supervised framing: inputs[i] = series[i : i+W), targets[i] = series[i+W+h-1]."""

    inputs: np.ndarray
    targets: np.ndarray
    window: int
    horizon: int

    def __len__(self):
        return len(self.inputs)


def make_windows(values: np.ndarray, window: int, horizon: int) -> WindowedDataset:
    """Frame a scaled 1-D series into sliding windows with a scalar target
    ``horizon`` days past each window's end. Sample count is L - W - h + 1.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise DataError(f"expected a 1-D series, got shape {values.shape}")
    if window < 1:
        raise DataError(f"window length must be >= 1, got {window}")
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    length = len(values)
    minimum = window + horizon
    if length < minimum:
        raise DataError(f"series of length {length} is too short to frame: "
                        f"need at least W + h = {minimum} points")
    count = length - window - horizon + 1
    inputs = np.lib.stride_tricks.sliding_window_view(values, window)[:count].copy()
    targets = values[window + horizon - 1:].copy()
    return WindowedDataset(inputs, targets, window, horizon)
