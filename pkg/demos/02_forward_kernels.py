"""Poke each forward kernel with tiny tensors you can check by hand."""

import numpy as np

from demandcast import (ConvParams, DenseParams, LstmParams, bilstm_forward,
                        conv1d_forward, dense_forward, lstm_cell_forward,
                        lstm_forward, maxpool1d, relu)

# 1-D convolution is a sliding dot product: an edge-detector kernel.
x = np.array([[1.0], [2.0], [3.0], [4.0]])
edge = ConvParams(np.array([[[1.0, 0.0, -1.0]]]), np.zeros(1), "valid")
print("conv valid  :", conv1d_forward(x, edge).ravel())
edge_same = ConvParams(edge.weights, edge.bias, "same")
print("conv same   :", conv1d_forward(x, edge_same).ravel(), "(zero-padded ends)")

# ReLU then non-overlapping max pooling halves the sequence.
feat = conv1d_forward(x, edge_same)
pooled, argmax = maxpool1d(relu(feat), 2)
print("relu+pool   :", pooled.ravel(), "argmax offsets", argmax.ravel())

# A 2-unit LSTM cell from zero state; gate order is (forget, input, output, candidate).
rng = np.random.default_rng(0)
cell = LstmParams(rng.uniform(-0.5, 0.5, (4, 2, 1)),
                  rng.uniform(-0.5, 0.5, (4, 2, 2)),
                  np.zeros((4, 2)))
h, c = lstm_cell_forward(np.array([0.7]), np.zeros(2), np.zeros(2), cell)
print("lstm cell   : h =", h, " c =", c)

# Running the same cell over a sequence threads the state.
seq = rng.uniform(0, 1, (5, 1))
hs, h_final, _ = lstm_forward(seq, cell)
print("lstm seq    : per-step h shape", hs.shape, " final h =", h_final)

# The backward direction is the forward pass on the reversed sequence.
hs_b, h_b, _ = lstm_forward(seq, cell, "backward")
assert np.array_equal(hs_b, lstm_forward(seq[::-1], cell)[0][::-1])
print("backward dir: verified equal to reversed forward pass")

# A BiLSTM concatenates both directions, forward half first.
other = LstmParams(rng.uniform(-0.5, 0.5, (4, 2, 1)),
                   rng.uniform(-0.5, 0.5, (4, 2, 2)),
                   np.zeros((4, 2)))
both = bilstm_forward(seq, cell, other, return_sequences=True)
print("bilstm      : output is [T, 2*units] =", both.shape)

# The regression head is a plain affine map.
head = DenseParams(np.array([[1.0, 1.0, 0.0, 0.0]]), np.array([0.5]))
print("dense head  :", dense_forward(both[-1], head))
