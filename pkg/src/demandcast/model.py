"""Architecture builders, batched forward dispatch, and checkpoint I/O.

A model is an ordered list of layers, each holding its kind, static
hyperparameters, and named parameter tensors. Four architectures exist:

* ``proposed``  - Conv(k3,same)+ReLU+Pool2 three times (64/128/256 filters),
  BiLSTM(256, sequences), BiLSTM(256, final), Dense(1)
* ``lstm``      - LSTM(256, final), Dense(1)
* ``cnn_lstm``  - the proposed stack with both BiLSTMs replaced by
  unidirectional LSTMs
* ``cnn_bilstm`` - the proposed stack with a single final BiLSTM

``width_scale`` multiplies every filter/unit count (1.0 is architecture-exact).

Checkpoint format (version 1): magic ``DFC1``, one line of JSON
(architecture id, window, horizon, width_scale, scaler, seed, layer
manifest with parameter shapes), ``\\n``, the parameter tensors raveled
in manifest order as little-endian float64, then a little-endian CRC32
of that payload.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import (BadMagicError, ChecksumError, CheckpointError, DataError,
                     TruncatedError, VersionError)

MAGIC = b"DFC1"
CHECKPOINT_VERSION = 1
ARCHITECTURES = ("proposed", "lstm", "cnn_lstm", "cnn_bilstm")

# Parameter tensor names per layer kind, in serialization order.
PARAM_NAMES = {
    "conv1d": ("weights", "bias"),
    "relu": (),
    "maxpool": (),
    "lstm": ("W", "U", "b"),
    "bilstm": ("fw_W", "fw_U", "fw_b", "bw_W", "bw_U", "bw_b"),
    "dense": ("weights", "bias"),
}


@dataclass
class Layer:
    kind: str
    config: dict
    params: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class Model:
    arch: str
    window: int
    width_scale: float
    layers: list[Layer]
    horizon: int = 1
    scaler: tuple[float, float] | None = None
    seed: int | None = None

    def parameters(self) -> dict[str, np.ndarray]:
        """Named parameter tensors in fixed (layer, name) order."""
        out = {}
        for idx, layer in enumerate(self.layers):
            for name in PARAM_NAMES[layer.kind]:
                out[f"layer{idx:02d}.{layer.kind}.{name}"] = layer.params[name]
        return out

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())


def _scaled(count: int, scale: float) -> int:
    if not 0.0 < scale <= 1.0:
        raise DataError(f"width_scale must be in (0, 1], got {scale}")
    width = round(count * scale)
    if width < 1:
        raise DataError(f"width_scale {scale} shrinks a width of {count} below 1")
    return width


def _conv_layer(filters: int, in_channels: int, kernel: int = 3,
                padding: str = "same") -> Layer:
    return Layer("conv1d",
                 {"filters": filters, "in_channels": in_channels,
                  "kernel": kernel, "padding": padding},
                 {"weights": np.zeros((filters, in_channels, kernel)),
                  "bias": np.zeros(filters)})


def _lstm_layer(units: int, input_dim: int, return_sequences: bool) -> Layer:
    return Layer("lstm",
                 {"units": units, "input_dim": input_dim,
                  "return_sequences": return_sequences},
                 {"W": np.zeros((4, units, input_dim)),
                  "U": np.zeros((4, units, units)),
                  "b": np.zeros((4, units))})


def _bilstm_layer(units: int, input_dim: int, return_sequences: bool) -> Layer:
    params = {}
    for side in ("fw", "bw"):
        params[f"{side}_W"] = np.zeros((4, units, input_dim))
        params[f"{side}_U"] = np.zeros((4, units, units))
        params[f"{side}_b"] = np.zeros((4, units))
    return Layer("bilstm",
                 {"units": units, "input_dim": input_dim,
                  "return_sequences": return_sequences}, params)


def _dense_layer(units: int, input_dim: int) -> Layer:
    return Layer("dense", {"units": units, "input_dim": input_dim},
                 {"weights": np.zeros((units, input_dim)), "bias": np.zeros(units)})


def _conv_front(window: int, filters: tuple[int, int, int]) -> tuple[list[Layer], int, int]:
    """Conv+ReLU+Pool2 triplets; returns (layers, seq_len_out, channels_out)."""
    if window % 8 != 0:
        raise DataError(f"window length {window} must be divisible by 8 "
                        "(three pool-2 stages)")
    layers: list[Layer] = []
    t, channels = window, 1
    for f in filters:
        layers.append(_conv_layer(f, channels))
        layers.append(Layer("relu", {}))
        layers.append(Layer("maxpool", {"pool": 2}))
        t //= 2
        channels = f
    return layers, t, channels


def _assemble(arch: str, window: int, width_scale: float,
              filters: tuple[int, int, int], units: int) -> Model:
    if arch == "lstm":
        if window % 8 != 0:
            raise DataError(f"window length {window} must be divisible by 8")
        layers = [_lstm_layer(units, 1, return_sequences=False)]
        width = units
    else:
        layers, _, channels = _conv_front(window, filters)
        if arch == "proposed":
            layers.append(_bilstm_layer(units, channels, return_sequences=True))
            layers.append(_bilstm_layer(units, 2 * units, return_sequences=False))
            width = 2 * units
        elif arch == "cnn_lstm":
            layers.append(_lstm_layer(units, channels, return_sequences=True))
            layers.append(_lstm_layer(units, units, return_sequences=False))
            width = units
        elif arch == "cnn_bilstm":
            layers.append(_bilstm_layer(units, channels, return_sequences=False))
            width = 2 * units
        else:
            raise DataError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    layers.append(_dense_layer(1, width))
    model = Model(arch, window, width_scale, layers)
    validate_shapes(model)
    return model


def build_proposed(window: int, width_scale: float = 1.0) -> Model:
    """The CNN + stacked-BiLSTM forecaster at the given width scale."""
    filters = tuple(_scaled(f, width_scale) for f in (64, 128, 256))
    units = _scaled(256, width_scale)
    return _assemble("proposed", window, width_scale, filters, units)


def build_benchmark(kind: str, window: int, width_scale: float = 1.0) -> Model:
    """One of the benchmark ablations: 'lstm', 'cnn_lstm' or 'cnn_bilstm'."""
    if kind not in ("lstm", "cnn_lstm", "cnn_bilstm"):
        raise DataError(f"unknown benchmark {kind!r}; expected lstm, cnn_lstm or cnn_bilstm")
    filters = tuple(_scaled(f, width_scale) for f in (64, 128, 256))
    units = _scaled(256, width_scale)
    return _assemble(kind, window, width_scale, filters, units)


def build(arch: str, window: int, width_scale: float = 1.0) -> Model:
    if arch == "proposed":
        return build_proposed(window, width_scale)
    return build_benchmark(arch, window, width_scale)


def reduced_proposed(window: int = 8) -> Model:
    """CI/gradient-check scale variant of the proposed stack: conv filters
    4/8/16 and BiLSTM units 8. Those widths are not reachable through a
    single width_scale, hence the dedicated builder.
    """
    return _assemble("proposed", window, 1.0 / 16.0, (4, 8, 16), 8)


def validate_shapes(model: Model) -> list[tuple]:
    """Propagate shapes through the stack; raises DataError on any mismatch.

    Returns the shape chain as (seq_len, channels) pairs, seq_len None once
    the sequence axis has collapsed.
    """
    if model.layers and model.layers[0].kind == "dense":
        # A head-only (linear) model consumes the window as a flat vector.
        t, channels = None, model.window
    else:
        t, channels = model.window, 1
    chain: list[tuple] = [(t, channels)]
    for idx, layer in enumerate(model.layers):
        kind, cfg = layer.kind, layer.config
        where = f"layer {idx} ({kind})"
        if kind == "conv1d":
            if t is None:
                raise DataError(f"{where}: convolution needs a sequence input")
            if cfg["in_channels"] != channels:
                raise DataError(f"{where}: expects {cfg['in_channels']} channels, "
                                f"gets {channels}")
            if cfg["padding"] == "valid":
                if t < cfg["kernel"]:
                    raise DataError(f"{where}: sequence {t} shorter than kernel")
                t = t - cfg["kernel"] + 1
            channels = cfg["filters"]
        elif kind == "relu":
            pass
        elif kind == "maxpool":
            if t is None or t < cfg["pool"]:
                raise DataError(f"{where}: sequence {t} shorter than pool {cfg['pool']}")
            t //= cfg["pool"]
        elif kind in ("lstm", "bilstm"):
            if t is None:
                raise DataError(f"{where}: recurrent layer needs a sequence input")
            if cfg["input_dim"] != channels:
                raise DataError(f"{where}: expects input dim {cfg['input_dim']}, "
                                f"gets {channels}")
            channels = cfg["units"] * (2 if kind == "bilstm" else 1)
            if not cfg["return_sequences"]:
                t = None
        elif kind == "dense":
            if t is not None:
                raise DataError(f"{where}: dense head needs a collapsed (vector) input")
            if cfg["input_dim"] != channels:
                raise DataError(f"{where}: expects input dim {cfg['input_dim']}, "
                                f"gets {channels}")
            channels = cfg["units"]
        else:
            raise DataError(f"{where}: unknown layer kind")
        chain.append((t, channels))
    return chain


def _layer_forward(layer: Layer, x, want_cache: bool):
    kind, cfg, p = layer.kind, layer.config, layer.params
    if kind == "conv1d":
        params = nn.ConvParams(p["weights"], p["bias"], cfg["padding"])
        if want_cache:
            return nn.conv1d_forward(x, params, want_cache=True)
        return nn.conv1d_forward(x, params), None
    if kind == "relu":
        return nn.relu(x), ({"mask": x > 0} if want_cache else None)
    if kind == "maxpool":
        out, arg = nn.maxpool1d(x, cfg["pool"])
        return out, ({"arg": arg, "in_shape": x.shape} if want_cache else None)
    if kind == "lstm":
        params = nn.LstmParams(p["W"], p["U"], p["b"])
        if want_cache:
            hs, h, _, cache = nn.lstm_forward(x, params, "forward", want_cache=True)
        else:
            hs, h, _ = nn.lstm_forward(x, params, "forward")
            cache = None
        return (hs if cfg["return_sequences"] else h), cache
    if kind == "bilstm":
        fw = nn.LstmParams(p["fw_W"], p["fw_U"], p["fw_b"])
        bw = nn.LstmParams(p["bw_W"], p["bw_U"], p["bw_b"])
        if not want_cache:
            return nn.bilstm_forward(x, fw, bw, cfg["return_sequences"]), None
        hs_f, h_f, _, cache_f = nn.lstm_forward(x, fw, "forward", want_cache=True)
        hs_b, h_b, _, cache_b = nn.lstm_forward(x, bw, "backward", want_cache=True)
        if cfg["return_sequences"]:
            out = np.concatenate([hs_f, hs_b], axis=-1)
        else:
            out = np.concatenate([h_f, h_b], axis=-1)
        return out, {"fw": cache_f, "bw": cache_b}
    if kind == "dense":
        params = nn.DenseParams(p["weights"], p["bias"])
        return nn.dense_forward(x, params), ({"x": x} if want_cache else None)
    raise DataError(f"unknown layer kind {kind!r}")


def forward_batch(model: Model, inputs, want_cache: bool = False):
    """Forward pass on a batch of windows [B, W] -> predictions [B].

    With ``want_cache`` also returns the per-layer caches needed for
    backpropagation.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.window:
        raise DataError(f"expected batch shape [B, {model.window}], got {x.shape}")
    act = x if model.layers[0].kind == "dense" else x[:, :, None]
    caches = []
    for layer in model.layers:
        act, cache = _layer_forward(layer, act, want_cache)
        caches.append(cache)
    pred = act[:, 0]
    if want_cache:
        return pred, caches
    return pred


def predict_batch(model: Model, inputs) -> np.ndarray:
    """Deterministic forward pass over a stack of scaled windows."""
    return forward_batch(model, inputs)


def predict(model: Model, window) -> float:
    """Forward pass on one scaled window of length W."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.window,):
        raise DataError(f"expected a window of length {model.window}, "
                        f"got shape {window.shape}")
    return float(forward_batch(model, window[None])[0])


def forecast_recursive(model: Model, seed_window, steps: int) -> np.ndarray:
    """Multi-step forecast: predict, append, drop the oldest, repeat.

    Inputs and outputs are on the scaled [0, 1] axis, in time order.
    """
    if steps < 1:
        raise DataError(f"steps must be >= 1, got {steps}")
    window = np.asarray(seed_window, dtype=np.float64).copy()
    out = np.empty(steps)
    for k in range(steps):
        out[k] = predict(model, window)
        window = np.roll(window, -1)
        window[-1] = out[k]
    return out


# ---------------------------------------------------------------------------
# Checkpoint I/O


def parameter_payload(model: Model) -> bytes:
    """All parameter tensors raveled in manifest order, little-endian float64."""
    chunks = [arr.astype("<f8", copy=False).tobytes(order="C")
              for arr in model.parameters().values()]
    return b"".join(chunks)


def _header_dict(model: Model) -> dict:
    manifest = []
    for layer in model.layers:
        manifest.append({
            "kind": layer.kind,
            "config": layer.config,
            "params": [[name, list(layer.params[name].shape)]
                       for name in PARAM_NAMES[layer.kind]],
        })
    return {
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "window": model.window,
        "horizon": model.horizon,
        "width_scale": model.width_scale,
        "scaler": list(model.scaler) if model.scaler is not None else None,
        "seed": model.seed,
        "layers": manifest,
    }


def save_model(model: Model, path) -> None:
    """Write a version-1 checkpoint. Atomic: temp file then rename."""
    header = json.dumps(_header_dict(model), sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    payload = parameter_payload(model)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(b"\n")
        fh.write(payload)
        fh.write(struct.pack("<I", crc))
    os.replace(tmp, path)


def load_model(path) -> Model:
    """Read a checkpoint back; every parameter is bit-identical to what was saved."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc

    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint (bad magic {blob[:4]!r})")
    newline = blob.find(b"\n", 4)
    if newline < 0:
        raise TruncatedError(f"{path}: header is not terminated")
    try:
        header = json.loads(blob[4:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed header: {exc}") from exc

    version = header.get("version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: checkpoint version {version} not supported "
                           f"(supported: {CHECKPOINT_VERSION})")

    manifest = []
    total = 0
    for entry in header["layers"]:
        kind, config = entry["kind"], entry["config"]
        if kind not in PARAM_NAMES:
            raise CheckpointError(f"{path}: unknown layer kind {kind!r} in manifest")
        shapes = {name: tuple(shape) for name, shape in entry["params"]}
        if tuple(shapes) != PARAM_NAMES[kind]:
            raise CheckpointError(f"{path}: manifest params for {kind} do not match "
                                  f"{PARAM_NAMES[kind]}")
        manifest.append((kind, config, shapes))
        total += sum(int(np.prod(s)) for s in shapes.values())

    payload_len = total * 8
    expected = newline + 1 + payload_len + 4
    if len(blob) < expected:
        raise TruncatedError(f"{path}: file has {len(blob)} bytes, "
                             f"expected {expected}")
    if len(blob) > expected:
        raise CheckpointError(f"{path}: {len(blob) - expected} bytes of trailing garbage")

    payload = blob[newline + 1: newline + 1 + payload_len]
    (crc_stored,) = struct.unpack("<I", blob[-4:])
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != crc_stored:
        raise ChecksumError(f"{path}: payload CRC {crc:#010x} does not match "
                            f"stored {crc_stored:#010x}")

    offset = 0
    layers = []
    for kind, config, shapes in manifest:
        params = {}
        for name, shape in shapes.items():
            size = int(np.prod(shape)) * 8
            arr = np.frombuffer(payload[offset: offset + size], dtype="<f8").copy()
            params[name] = arr.reshape(shape)
            offset += size
        layers.append(Layer(kind, config, params))

    scaler = header.get("scaler")
    model = Model(header["arch"], header["window"], header["width_scale"], layers,
                  horizon=header.get("horizon", 1),
                  scaler=tuple(scaler) if scaler is not None else None,
                  seed=header.get("seed"))
    validate_shapes(model)
    return model
