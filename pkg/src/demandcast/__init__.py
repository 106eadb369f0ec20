"""Short-term daily electricity demand forecasting, built from first
principles on numpy: data cleaning, min-max scaling, window framing,
CNN/BiLSTM forward and backward kernels, Adam training, and a
four-metric evaluation harness.
"""

from .data import (INVALID, MISSING, OBSERVED, Scaler, TimeSeries,
                   WindowedDataset, chronological_split, fit_scaler,
                   interpolate_missing, load_csv, make_windows, validate,
                   write_csv)
from .errors import (BadMagicError, ChecksumError, CheckpointError, ConfigError,
                     DataError, DemandcastError, NumericError, TruncatedError,
                     VersionError)
from .metrics import EvalSeries, MetricsReport, compare, evaluate, mae, mape, mse, rmse
from .model import (ARCHITECTURES, Model, build, build_benchmark, build_proposed,
                    forecast_recursive, load_model, predict, predict_batch,
                    reduced_proposed, save_model)
from .nn import (ConvParams, DenseParams, LstmParams, bilstm_forward,
                 conv1d_forward, dense_forward, lstm_cell_forward, lstm_forward,
                 maxpool1d, relu, sigmoid, tanh)
from .synth import synthetic_demand_series
from .training import (AdamState, GradCheckReport, TrainConfig, TrainHistory,
                       adam_step, backward, gradient_check, init_params,
                       mse_loss, train)

__version__ = "0.1.0"
