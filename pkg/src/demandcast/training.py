"""Reverse-mode differentiation of the layer stack, Adam, the training loop,
and a central-finite-difference gradient checker.

Backward passes consume the caches produced by the forward kernels in
:mod:`demandcast.nn` (via :func:`demandcast.model.forward_batch`), so the
derivative math lives here in one place. All batch reductions run in a
fixed order; with a fixed seed the whole loop is bit-reproducible on the
same machine.
"""

from __future__ import annotations

import csv
import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .errors import ConfigError, DataError, NumericError
from .model import Model, forward_batch, parameter_payload


@dataclass
class TrainConfig:
    """Optimizer and loop hyperparameters. Defaults: Adam's canonical
    constants, the published batch size 64 and 500 epochs."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    epochs: int = 500
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ConfigError(f"beta1/beta2 must lie in (0, 1), got "
                              f"{self.beta1}, {self.beta2}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.learning_rate < 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.items()},
                   {k: np.zeros_like(a) for k, a in params.items()})


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    checksum: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "seconds"])
            for epoch, (loss, secs) in enumerate(zip(self.losses, self.seconds), start=1):
                writer.writerow([epoch, repr(loss), f"{secs:.6f}"])


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DataError(f"prediction shape {pred.shape} does not match "
                        f"target shape {target.shape}")
    n = pred.size
    if n == 0:
        raise DataError("cannot compute a loss on an empty batch")
    residual = pred - target
    loss = float(np.mean(residual * residual))
    grad = (2.0 / n) * residual
    return loss, grad


def init_params(model: Model, seed: int) -> Model:
    """Seeded Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.0.

    Draw order is the fixed parameter order, so a given seed always
    produces the same initialization.
    """
    rng = np.random.default_rng(seed)

    def glorot(shape, fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    for layer in model.layers:
        cfg, p = layer.config, layer.params
        if layer.kind == "conv1d":
            receptive_in = cfg["in_channels"] * cfg["kernel"]
            receptive_out = cfg["filters"] * cfg["kernel"]
            p["weights"] = glorot(p["weights"].shape, receptive_in, receptive_out)
            p["bias"] = np.zeros_like(p["bias"])
        elif layer.kind == "lstm":
            p["W"] = glorot(p["W"].shape, cfg["input_dim"], cfg["units"])
            p["U"] = glorot(p["U"].shape, cfg["units"], cfg["units"])
            b = np.zeros_like(p["b"])
            b[0, :] = 1.0  # forget gate: keep early cell state alive
            p["b"] = b
        elif layer.kind == "bilstm":
            for side in ("fw", "bw"):
                p[f"{side}_W"] = glorot(p[f"{side}_W"].shape, cfg["input_dim"], cfg["units"])
                p[f"{side}_U"] = glorot(p[f"{side}_U"].shape, cfg["units"], cfg["units"])
                b = np.zeros_like(p[f"{side}_b"])
                b[0, :] = 1.0
                p[f"{side}_b"] = b
        elif layer.kind == "dense":
            p["weights"] = glorot(p["weights"].shape, cfg["input_dim"], cfg["units"])
            p["bias"] = np.zeros_like(p["bias"])
    model.seed = seed
    return model


# ---------------------------------------------------------------------------
# Backward passes


def _lstm_bptt(W, U, cache, d_hs):
    """Unroll gradients through one LSTM direction.

    All cache arrays and ``d_hs`` are in processing order ([B, T, ...]);
    the caller re-reverses for the backward direction. Returns the
    gradient w.r.t. the (processing-order) input sequence and the three
    parameter gradients.
    """
    x, h_prev, c_prev = cache["x"], cache["h_prev"], cache["c_prev"]
    f_all, i_all, o_all, g_all, c_all = (cache["f"], cache["i"], cache["o"],
                                         cache["g"], cache["c"])
    batch, steps, _ = x.shape
    units = W.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros((4, units))
    dx = np.empty_like(x)
    dh_next = np.zeros((batch, units))
    dc_next = np.zeros((batch, units))
    for t in reversed(range(steps)):
        f, i, o, g = f_all[:, t], i_all[:, t], o_all[:, t], g_all[:, t]
        tc = np.tanh(c_all[:, t])
        dh = d_hs[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da = np.stack([
            dc * c_prev[:, t] * f * (1.0 - f),
            dc * g * i * (1.0 - i),
            do * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ], axis=1)
        dW += np.einsum("bgu,bd->gud", da, x[:, t])
        dU += np.einsum("bgu,bv->guv", da, h_prev[:, t])
        db += da.sum(axis=0)
        dx[:, t] = np.einsum("bgu,gud->bd", da, W)
        dh_next = np.einsum("bgu,guv->bv", da, U)
        dc_next = dc * f
    return dx, dW, dU, db


def _per_step_grad(d_out, cache, units, return_sequences):
    """Expand a layer's output gradient into per-step hidden-state gradients
    in the direction's processing order."""
    x = cache["x"]
    batch, steps, _ = x.shape
    if return_sequences:
        # d_out is time-aligned to the input; backward-direction caches run
        # in reversed order.
        return d_out[:, ::-1, :] if cache["direction"] == "backward" else d_out
    d_hs = np.zeros((batch, steps, units))
    d_hs[:, steps - 1] = d_out
    return d_hs


def _layer_backward(layer, d_out, cache):
    kind, cfg, p = layer.kind, layer.config, layer.params
    if kind == "conv1d":
        w = p["weights"]
        filters, _, kernel = w.shape
        xp = cache["x_padded"]
        windows = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=-2)
        grads = {"weights": np.einsum("btj,btcm->jcm", d_out, windows),
                 "bias": d_out.sum(axis=(0, 1))}
        t_out = d_out.shape[1]
        dxp = np.zeros_like(xp)
        for m in range(kernel):
            dxp[:, m: m + t_out, :] += np.einsum("btj,jc->btc", d_out, w[:, :, m])
        if cfg["padding"] == "same":
            left = (kernel - 1) // 2
            t_in = cache["in_shape"][-2]
            dx = dxp[:, left: left + t_in, :]
        else:
            dx = dxp
        return dx, grads
    if kind == "relu":
        return d_out * cache["mask"], {}
    if kind == "maxpool":
        pool = cfg["pool"]
        arg = cache["arg"]
        t_out = arg.shape[1]
        dx = np.zeros(cache["in_shape"])
        t_idx = np.arange(t_out)[None, :, None] * pool + arg
        np.put_along_axis(dx, t_idx, d_out, axis=1)
        return dx, {}
    if kind == "lstm":
        d_hs = _per_step_grad(d_out, cache, cfg["units"], cfg["return_sequences"])
        dx, dW, dU, db = _lstm_bptt(p["W"], p["U"], cache, d_hs)
        return dx, {"W": dW, "U": dU, "b": db}
    if kind == "bilstm":
        units = cfg["units"]
        if cfg["return_sequences"]:
            d_f, d_b = d_out[..., :units], d_out[..., units:]
        else:
            d_f, d_b = d_out[:, :units], d_out[:, units:]
        grads = {}
        d_hs = _per_step_grad(d_f, cache["fw"], units, cfg["return_sequences"])
        dx_f, grads["fw_W"], grads["fw_U"], grads["fw_b"] = _lstm_bptt(
            p["fw_W"], p["fw_U"], cache["fw"], d_hs)
        d_hs = _per_step_grad(d_b, cache["bw"], units, cfg["return_sequences"])
        dx_b, grads["bw_W"], grads["bw_U"], grads["bw_b"] = _lstm_bptt(
            p["bw_W"], p["bw_U"], cache["bw"], d_hs)
        return dx_f + dx_b[:, ::-1, :], grads
    if kind == "dense":
        x = cache["x"]
        grads = {"weights": d_out.T @ x, "bias": d_out.sum(axis=0)}
        return d_out @ p["weights"], grads
    raise DataError(f"unknown layer kind {kind!r}")


def backward(model: Model, inputs, targets):
    """Loss and d(loss)/d(theta) for every parameter tensor on one batch.

    The batch gradient equals the mean of per-sample gradients (the MSE
    gradient carries the 1/B factor).
    """
    pred, caches = forward_batch(model, inputs, want_cache=True)
    loss, d_pred = mse_loss(pred, np.asarray(targets, dtype=np.float64))
    grad = d_pred[:, None]
    grads: dict[str, np.ndarray] = {}
    for idx in reversed(range(len(model.layers))):
        layer = model.layers[idx]
        grad, layer_grads = _layer_backward(layer, grad, caches[idx])
        for name, g in layer_grads.items():
            grads[f"layer{idx:02d}.{layer.kind}.{name}"] = g
    ordered = {key: grads[key] for key in model.parameters()}
    return loss, ordered


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, config: TrainConfig):
    """One Adam update, in place: m and v are decayed averages of g and g**2,
    bias-corrected, then theta -= lr * m_hat / (sqrt(v_hat) + eps)."""
    state.t += 1
    t = state.t
    for name, theta in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name} at Adam step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        theta -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return params, state


def train(model: Model, data: WindowedDataset, config: TrainConfig):
    """Run ``epochs`` passes of mini-batch Adam over the windowed dataset.

    Batch order is drawn from the seeded generator each epoch when
    ``shuffle`` is set; a trailing partial batch is trained as-is. The
    history records the per-epoch mean training loss (sample-weighted),
    wall seconds, and a CRC of the final parameters.
    """
    if len(data) == 0:
        raise DataError("training dataset is empty")
    if data.window != model.window:
        raise DataError(f"dataset windows have length {data.window} but the model "
                        f"expects {model.window}")
    model.horizon = data.horizon
    params = model.parameters()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(config.seed)
    n = len(data)
    history = TrainHistory()
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            loss, grads = backward(model, data.inputs[idx], data.targets[idx])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"batch {start // config.batch_size + 1}")
            adam_step(params, grads, state, config)
            total += loss * len(idx)
        history.losses.append(total / n)
        history.seconds.append(time.perf_counter() - started)
    history.checksum = zlib.crc32(parameter_payload(model)) & 0xFFFFFFFF
    return model, history


# ---------------------------------------------------------------------------
# Gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _batch_loss(model: Model, inputs, targets) -> float:
    pred = forward_batch(model, inputs)
    return mse_loss(pred, targets)[0]


def gradient_check(model: Model, inputs, targets, delta: float = 1e-5,
                   tolerance: float = 1e-4, corrupt=None) -> GradCheckReport:
    """Compare every analytic gradient entry against the central difference
    (L(theta+delta) - L(theta-delta)) / (2 delta).

    Relative error is |a - n| / max(|a|, |n|, 1e-12). Parameters are
    perturbed in place and restored bit-exactly; the model is unchanged on
    return. ``corrupt`` is a test hook mutating the analytic gradients.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    _, grads = backward(model, inputs, targets)
    if corrupt is not None:
        corrupt(grads)
    worst = (0.0, "", -1)
    checked = 0
    for name, theta in model.parameters().items():
        flat = theta.reshape(-1)
        gflat = grads[name].reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + delta
            loss_plus = _batch_loss(model, inputs, targets)
            flat[k] = original - delta
            loss_minus = _batch_loss(model, inputs, targets)
            flat[k] = original
            numeric = (loss_plus - loss_minus) / (2.0 * delta)
            analytic = gflat[k]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
            checked += 1
            if rel > worst[0]:
                worst = (rel, name, k)
    return GradCheckReport(worst[0], worst[1], worst[2], tolerance, checked)
