"""Forecast error metrics and the multi-model comparison report.

MSE/RMSE/MAE are reported on both the normalized [0, 1] axis and the
physical MW axis; MAPE only on MW (scaled actuals can be exactly zero).
The headline table follows the published convention: normalized
MSE/RMSE/MAE with MW-scale MAPE, four decimals, lowest MAPE flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Scaler, WindowedDataset
from .errors import DataError
from .model import Model, predict_batch

TABLE_COLUMNS = ("Model", "MSE", "RMSE", "MAE", "MAPE(%)")


@dataclass
class EvalSeries:
    """Aligned actual/forecast vectors on one scale ('normalized' or 'mw')."""

    actual: np.ndarray
    forecast: np.ndarray
    scale: str = "mw"

    def __post_init__(self):
        self.actual = np.asarray(self.actual, dtype=np.float64)
        self.forecast = np.asarray(self.forecast, dtype=np.float64)
        if self.actual.shape != self.forecast.shape or self.actual.ndim != 1:
            raise DataError(f"actual/forecast must be equal-length vectors, got "
                            f"{self.actual.shape} and {self.forecast.shape}")
        if len(self.actual) < 1:
            raise DataError("metrics need at least one point")


def mape(series: EvalSeries) -> float:
    """Mean absolute percentage error: 100/n * sum |A - F| / |A|."""
    zero = np.flatnonzero(series.actual == 0.0)
    if zero.size:
        raise DataError(f"MAPE undefined: actual value is zero at index {zero[0]}")
    return float(np.mean(np.abs(series.actual - series.forecast)
                         / np.abs(series.actual)) * 100.0)


def mae(series: EvalSeries) -> float:
    return float(np.mean(np.abs(series.actual - series.forecast)))


def mse(series: EvalSeries) -> float:
    residual = series.actual - series.forecast
    return float(np.mean(residual * residual))


def rmse(series: EvalSeries) -> float:
    return math.sqrt(mse(series))


@dataclass
class MetricsReport:
    """One model's evaluation: each metric at both scales plus run metadata."""

    model: str
    normalized: dict[str, float]
    mw: dict[str, float]
    meta: dict = field(default_factory=dict)


def evaluate(model: Model, test: WindowedDataset, scaler: Scaler,
             meta: dict | None = None) -> MetricsReport:
    """One-step predictions over every test window, scored on both scales."""
    if test.window != model.window:
        raise DataError(f"test windows have length {test.window} but the model "
                        f"expects {model.window}")
    forecast = predict_batch(model, test.inputs)
    actual = test.targets
    norm = EvalSeries(actual, forecast, "normalized")
    mw_series = EvalSeries(scaler.inverse_transform(actual),
                           scaler.inverse_transform(forecast), "mw")
    return MetricsReport(
        model=model.arch,
        normalized={"mae": mae(norm), "mse": mse(norm), "rmse": rmse(norm)},
        mw={"mape_pct": mape(mw_series), "mae": mae(mw_series),
            "mse": mse(mw_series), "rmse": rmse(mw_series)},
        meta=dict(meta or {}),
    )


def report_payload(reports: list[MetricsReport]) -> dict:
    """Machine-readable comparison: two rows per model (one per scale),
    full precision, plus the best model by MW-scale MAPE."""
    if not reports:
        raise DataError("need at least one report to compare")
    rows = []
    for rep in reports:
        rows.append({"model": rep.model, "scale": "normalized",
                     "mse": rep.normalized["mse"], "rmse": rep.normalized["rmse"],
                     "mae": rep.normalized["mae"], "mape_pct": None})
        rows.append({"model": rep.model, "scale": "mw",
                     "mse": rep.mw["mse"], "rmse": rep.mw["rmse"],
                     "mae": rep.mw["mae"], "mape_pct": rep.mw["mape_pct"]})
    best = min(reports, key=lambda rep: rep.mw["mape_pct"]).model
    meta = reports[0].meta
    return {"rows": rows, "best": best, "meta": dict(meta)}


def render_table(payload: dict) -> str:
    """Render the headline comparison table from the JSON payload."""
    by_model: dict[str, dict[str, dict]] = {}
    order: list[str] = []
    for row in payload["rows"]:
        if row["model"] not in by_model:
            by_model[row["model"]] = {}
            order.append(row["model"])
        by_model[row["model"]][row["scale"]] = row
    best = payload["best"]
    lines = []
    cells = []
    for name in order:
        norm, mw_row = by_model[name]["normalized"], by_model[name]["mw"]
        label = name + (" *" if name == best else "")
        cells.append((label, f"{norm['mse']:.4f}", f"{norm['rmse']:.4f}",
                      f"{norm['mae']:.4f}", f"{mw_row['mape_pct']:.4f}"))
    widths = [max(len(TABLE_COLUMNS[i]), *(len(row[i]) for row in cells))
              for i in range(len(TABLE_COLUMNS))]
    header = "  ".join(col.ljust(widths[i]) for i, col in enumerate(TABLE_COLUMNS))
    lines.append(header)
    lines.append("-" * len(header))
    for row in cells:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    lines.append("* lowest MAPE; MSE/RMSE/MAE on the normalized scale, MAPE on MW")
    return "\n".join(lines)


def compare(reports: list[MetricsReport]) -> tuple[str, dict]:
    """Comparison table (text) and machine-readable payload for >= 1 models."""
    payload = report_payload(reports)
    return render_table(payload), payload
