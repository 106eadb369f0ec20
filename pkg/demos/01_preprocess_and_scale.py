"""Walk through the data pipeline: ingest a gappy CSV, flag bad points,
impute by linear interpolation, split chronologically, and scale.
"""

from pathlib import Path

import numpy as np

from demandcast import (MISSING, chronological_split, fit_scaler,
                        interpolate_missing, load_csv, make_windows, validate,
                        write_csv)
from demandcast.synth import synthetic_demand_series

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

# Fabricate a year of daily demand with two gaps and one corrupt reading.
series = synthetic_demand_series(365, seed=21)
series.values[100] = np.nan
series.flags[100] = MISSING
series.values[101] = np.nan
series.flags[101] = MISSING
series.values[200] = -999.0  # a recording error: demand cannot be negative
raw_csv = out_dir / "raw_demand.csv"
write_csv(series, raw_csv)
print(f"wrote {raw_csv} with 2 missing days and 1 corrupt reading")

series = load_csv(raw_csv)
print(f"loaded {len(series)} days, "
      f"{int((series.flags != 0).sum())} of them unusable")

series, flagged = validate(series, max_mw=10000.0)
print(f"validation re-flagged {flagged} point(s) outside (0, 10000] MW")

clean = interpolate_missing(series)
print(f"after interpolation: gaps remaining = {int((clean.flags != 0).sum())}")
print(f"  imputed day 100 -> {clean.values[100]:.1f} MW "
      f"(neighbors {clean.values[99]:.1f} and {clean.values[102]:.1f})")

train, test = chronological_split(clean, 0.8, min_points=9)
print(f"chronological 80:20 split -> {len(train)} train days, {len(test)} test days")

scaler = fit_scaler(train)
print(f"scaler fitted on train only: x_min={scaler.x_min:.1f}, x_max={scaler.x_max:.1f}")
scaled_train = scaler.transform(train.values)
scaled_test = scaler.transform(test.values)
print(f"train maps into [{scaled_train.min():.3f}, {scaled_train.max():.3f}]; "
      f"test may leave [0,1]: [{scaled_test.min():.3f}, {scaled_test.max():.3f}]")

windows = make_windows(scaled_train, window=8, horizon=1)
print(f"framed {len(windows)} supervised samples: inputs {windows.inputs.shape}, "
      f"targets {windows.targets.shape}")
