"""Forward kernels for every layer the forecaster uses.

Shape conventions: sequence tensors are [T, C] or batched [B, T, C],
feature vectors are [C] or [B, C]. All kernels accept either form, are
pure, and keep everything in float64. Kernels optionally return a cache
of forward intermediates; the reverse-mode counterparts in
:mod:`demandcast.train` consume those caches.

LSTM gate packing is fixed globally along axis 0 of W/U/b:
index 0 = forget, 1 = input, 2 = output, 3 = candidate. Gates use the
sigmoid, the candidate and the cell output use tanh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATE_ORDER = ("forget", "input", "output", "candidate")


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def sigmoid(x):
    """Element-wise 1 / (1 + exp(-x)), computed overflow-free."""
    x = _as_f64(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    """Element-wise hyperbolic tangent."""
    return np.tanh(_as_f64(x))


def relu(x):
    """Element-wise max(0, x)."""
    return np.maximum(_as_f64(x), 0.0)


@dataclass
class ConvParams:
    """1-D convolution parameters: weights [filters, in_channels, kernel], bias [filters]."""

    weights: np.ndarray
    bias: np.ndarray
    padding: str = "valid"

    def __post_init__(self):
        self.weights = _as_f64(self.weights)
        self.bias = _as_f64(self.bias)
        if self.weights.ndim != 3:
            raise ValueError(f"conv weights must be rank 3, got shape {self.weights.shape}")
        if self.weights.shape[0] < 1 or self.weights.shape[2] < 1:
            raise ValueError(f"need filters >= 1 and kernel >= 1, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"bias shape {self.bias.shape} does not match "
                             f"{self.weights.shape[0]} filters")
        if self.padding not in ("valid", "same"):
            raise ValueError(f"padding must be 'valid' or 'same', got {self.padding!r}")

    @property
    def filters(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]


@dataclass
class LstmParams:
    """LSTM parameters in the global gate order.

    W: [4, units, input_dim] input weights, U: [4, units, units] recurrent
    weights, b: [4, units] biases.
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = _as_f64(self.W)
        self.U = _as_f64(self.U)
        self.b = _as_f64(self.b)
        if self.W.ndim != 3 or self.W.shape[0] != 4:
            raise ValueError(f"W must be [4, units, input_dim], got {self.W.shape}")
        units = self.W.shape[1]
        if self.U.shape != (4, units, units):
            raise ValueError(f"U must be [4, {units}, {units}], got {self.U.shape}")
        if self.b.shape != (4, units):
            raise ValueError(f"b must be [4, {units}], got {self.b.shape}")

    @property
    def units(self) -> int:
        return self.W.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[2]


@dataclass
class DenseParams:
    """Affine head parameters: weights [out, in], bias [out]."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = _as_f64(self.weights)
        self.bias = _as_f64(self.bias)
        if self.weights.ndim != 2:
            raise ValueError(f"dense weights must be rank 2, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"bias shape {self.bias.shape} does not match out "
                             f"dim {self.weights.shape[0]}")


def conv1d_forward(x, params: ConvParams, want_cache: bool = False):
    """Sliding cross-correlation: out[i, j] = b[j] + sum_{m,c} w[j,c,m] * x[i+m, c].

    'valid' gives T' = T - M + 1; 'same' zero-pads floor((M-1)/2) left and
    ceil((M-1)/2) right so T' = T.
    """
    x = _as_f64(x)
    if x.ndim not in (2, 3):
        raise ValueError(f"conv input must be [T, C] or [B, T, C], got shape {x.shape}")
    w = params.weights
    m = params.kernel
    if x.shape[-1] != params.in_channels:
        raise ValueError(f"input has {x.shape[-1]} channels, conv expects {params.in_channels}")
    if params.padding == "same":
        left = (m - 1) // 2
        pad = [(0, 0)] * (x.ndim - 2) + [(left, m - 1 - left), (0, 0)]
        xp = np.pad(x, pad)
    else:
        if x.shape[-2] < m:
            raise ValueError(f"input length {x.shape[-2]} is shorter than kernel {m} "
                             "with 'valid' padding")
        xp = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, m, axis=-2)
    out = np.einsum("...cm,jcm->...j", windows, w) + params.bias
    if want_cache:
        return out, {"x_padded": xp, "in_shape": x.shape}
    return out


def maxpool1d(x, pool: int):
    """Non-overlapping max pooling with stride = pool size.

    The trailing remainder shorter than ``pool`` is dropped. Returns the
    pooled tensor and the argmax offsets (position within each window,
    kept for gradient routing).
    """
    x = _as_f64(x)
    if x.ndim not in (2, 3):
        raise ValueError(f"pool input must be [T, C] or [B, T, C], got shape {x.shape}")
    if pool < 1:
        raise ValueError(f"pool size must be >= 1, got {pool}")
    t = x.shape[-2]
    if t < pool:
        raise ValueError(f"input length {t} is shorter than pool size {pool}")
    t_out = t // pool
    grouped = x[..., : t_out * pool, :].reshape(x.shape[:-2] + (t_out, pool, x.shape[-1]))
    out = grouped.max(axis=-2)
    arg = grouped.argmax(axis=-2)
    return out, arg


def lstm_cell_forward(x_t, h_prev, c_prev, params: LstmParams):
    """One LSTM step.

    f, i, o = sigmoid(W x + U h_prev + b) per gate, candidate = tanh(...),
    c_t = f * c_prev + i * candidate, h_t = o * tanh(c_t).
    """
    h, c, _ = _lstm_step(_as_f64(x_t), _as_f64(h_prev), _as_f64(c_prev), params)
    return h, c


def _lstm_step(x_t, h_prev, c_prev, params):
    if x_t.shape[-1] != params.input_dim:
        raise ValueError(f"step input dim {x_t.shape[-1]} does not match "
                         f"params input_dim {params.input_dim}")
    if h_prev.shape[-1] != params.units or c_prev.shape[-1] != params.units:
        raise ValueError("state width does not match params units")
    act = np.einsum("...d,gud->...gu", x_t, params.W) \
        + np.einsum("...v,guv->...gu", h_prev, params.U) + params.b
    f = sigmoid(act[..., 0, :])
    i = sigmoid(act[..., 1, :])
    o = sigmoid(act[..., 2, :])
    g = np.tanh(act[..., 3, :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, (f, i, o, g)


def lstm_forward(seq, params: LstmParams, direction: str = "forward",
                 want_cache: bool = False):
    """Run an LSTM over a sequence from zero initial state.

    Returns (per-step hidden states aligned to input time order,
    final hidden state, final cell state). ``direction="backward"``
    iterates t = T..1; its per-step outputs are re-aligned so row t still
    corresponds to input step t, and "final" means the state after
    processing input step 1.
    """
    seq = _as_f64(seq)
    if seq.ndim not in (2, 3):
        raise ValueError(f"sequence must be [T, D] or [B, T, D], got shape {seq.shape}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if seq.shape[-2] == 0:
        raise ValueError("cannot run an LSTM over an empty sequence")

    batched = seq.ndim == 3
    x = seq if batched else seq[None]
    if direction == "backward":
        x = x[:, ::-1, :]

    b, t, _ = x.shape
    units = params.units
    hs = np.empty((b, t, units))
    f_all = np.empty((b, t, units))
    i_all = np.empty((b, t, units))
    o_all = np.empty((b, t, units))
    g_all = np.empty((b, t, units))
    c_all = np.empty((b, t, units))
    h_prev_all = np.empty((b, t, units))
    c_prev_all = np.empty((b, t, units))

    h = np.zeros((b, units))
    c = np.zeros((b, units))
    for step in range(t):
        h_prev_all[:, step] = h
        c_prev_all[:, step] = c
        h, c, (f, i, o, g) = _lstm_step(x[:, step], h, c, params)
        hs[:, step] = h
        f_all[:, step], i_all[:, step] = f, i
        o_all[:, step], g_all[:, step] = o, g
        c_all[:, step] = c

    aligned = hs[:, ::-1, :] if direction == "backward" else hs
    if not batched:
        aligned, h, c = aligned[0], h[0], c[0]
    if want_cache:
        cache = {"x": x, "h_prev": h_prev_all, "c_prev": c_prev_all,
                 "f": f_all, "i": i_all, "o": o_all, "g": g_all, "c": c_all,
                 "direction": direction, "batched": batched}
        return aligned, h, c, cache
    return aligned, h, c


def bilstm_forward(seq, fw: LstmParams, bw: LstmParams, return_sequences: bool = True):
    """Bidirectional LSTM: forward and backward passes over the same input,
    hidden states concatenated (forward half first).

    With ``return_sequences`` the output is [T, 2*units] (row t pairs the
    two directions' states for input step t); without, it is the
    concatenation of the forward final state (t = T) and the backward
    final state (t = 1).
    """
    if fw.units != bw.units:
        raise ValueError(f"direction unit counts differ: {fw.units} vs {bw.units}")
    hs_f, h_f, _ = lstm_forward(seq, fw, "forward")
    hs_b, h_b, _ = lstm_forward(seq, bw, "backward")
    if return_sequences:
        return np.concatenate([hs_f, hs_b], axis=-1)
    return np.concatenate([h_f, h_b], axis=-1)


def dense_forward(x, params: DenseParams):
    """Affine map y = W x + b (no activation; the head regresses directly)."""
    x = _as_f64(x)
    if x.shape[-1] != params.weights.shape[1]:
        raise ValueError(f"dense input width {x.shape[-1]} does not match "
                         f"weights in-dim {params.weights.shape[1]}")
    return np.einsum("...i,oi->...o", x, params.weights) + params.bias
