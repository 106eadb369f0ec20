"""Train the reduced CNN + stacked-BiLSTM on synthetic demand, evaluate on
the held-out tail, save a checkpoint, and roll a one-week forecast.

Takes about half a minute; pass --quick for a 20-epoch smoke run.
"""

import sys
from pathlib import Path

from demandcast import (TrainConfig, chronological_split, evaluate,
                        fit_scaler, forecast_recursive, init_params, load_model,
                        make_windows, reduced_proposed, save_model, train)
from demandcast.synth import synthetic_demand_series

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
epochs = 20 if "--quick" in sys.argv else 200

series = synthetic_demand_series(2190, seed=7)
print(f"synthetic series: {len(series)} days, "
      f"{series.values.min():.0f}..{series.values.max():.0f} MW")

train_s, test_s = chronological_split(series, 0.8, min_points=9)
scaler = fit_scaler(train_s)
train_w = make_windows(scaler.transform(train_s.values), window=8, horizon=1)
test_w = make_windows(scaler.transform(test_s.values), window=8, horizon=1)

model = reduced_proposed(window=8)
init_params(model, seed=42)
model.scaler = (scaler.x_min, scaler.x_max)
print(f"reduced model: {model.parameter_count()} parameters, training {epochs} epochs...")

model, history = train(model, train_w, TrainConfig(epochs=epochs, batch_size=64, seed=42))
print(f"loss: epoch 1 = {history.losses[0]:.5f} -> final = {history.losses[-1]:.5f}")

report = evaluate(model, test_w, scaler)
print(f"test metrics (MW): MAPE {report.mw['mape_pct']:.2f}%  "
      f"MAE {report.mw['mae']:.1f}  RMSE {report.mw['rmse']:.1f}")

ckpt = out_dir / "reduced_model.dfc"
save_model(model, ckpt)
reloaded = load_model(ckpt)
print(f"checkpoint round-trips bit-exactly: "
      f"{reloaded.parameters().keys() == model.parameters().keys()}")

last_window = scaler.transform(series.values[-8:])
week = scaler.inverse_transform(forecast_recursive(reloaded, last_window, steps=7))
print("next 7 days (MW):", " ".join(f"{v:.0f}" for v in week))
