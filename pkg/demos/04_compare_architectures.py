"""Train all four architectures on the same split/scaler/seed and emit the
four-row comparison table (benchmark-style: lstm, cnn_bilstm, cnn_lstm,
proposed). Small widths and few epochs keep this quick; crank epochs up
for a real comparison.
"""

from pathlib import Path

from demandcast import (TrainConfig, build, chronological_split, compare,
                        evaluate, fit_scaler, init_params, make_windows, train)
from demandcast.synth import synthetic_demand_series

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

series = synthetic_demand_series(1100, seed=7)
train_s, test_s = chronological_split(series, 0.8, min_points=9)
scaler = fit_scaler(train_s)
train_w = make_windows(scaler.transform(train_s.values), window=8, horizon=1)
test_w = make_windows(scaler.transform(test_s.values), window=8, horizon=1)

reports = []
for arch in ("lstm", "cnn_bilstm", "cnn_lstm", "proposed"):
    model = build(arch, window=8, width_scale=0.0625)
    init_params(model, seed=42)
    model.scaler = (scaler.x_min, scaler.x_max)
    model, history = train(model, train_w, TrainConfig(epochs=30, batch_size=64, seed=42))
    reports.append(evaluate(model, test_w, scaler))
    print(f"{arch:11s} trained: final loss {history.losses[-1]:.5f}")

table, payload = compare(reports)
print()
print(table)
(out_dir / "comparison.txt").write_text(table + "\n")
print(f"\nbest by MAPE: {payload['best']}  (table saved to {out_dir/'comparison.txt'})")
