"""Token embedding and bidirectional LSTM encoding.

A sentence enters as a padded id sequence plus a boolean mask (True = real
token, padding only at the tail) and leaves as an n-by-2u hidden-state matrix
whose padded rows are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T

PAD_ID = 0
UNK_ID = 1


class EmbeddingTable:
    """Trainable id -> vector table; row 0 is the padding row."""

    def __init__(self, table, trainable=True):
        self.table = table
        self.table.requires_grad = bool(trainable)
        self.trainable = bool(trainable)

    @property
    def vocab_size(self):
        return self.table.shape[0]

    @property
    def dim(self):
        return self.table.shape[1]

    @classmethod
    def random(cls, vocab_size, dim, rng, dtype=T.DEFAULT_DTYPE, trainable=True):
        data = rng.uniform(-0.1, 0.1, size=(vocab_size, dim)).astype(dtype)
        data[PAD_ID] = 0.0
        return cls(T.Tensor(data, requires_grad=trainable), trainable=trainable)


def embed(tokens, table):
    """Look up token ids: row i of the result is the table row of token i."""
    ids = np.asarray(tokens)
    if ids.size and (ids.min() < 0 or ids.max() >= table.vocab_size):
        raise IndexError(f"token id out of range [0, {table.vocab_size}): {ids.min()}..{ids.max()}")
    return T.gather_rows(table.table, ids)


class LstmParams:
    """One direction of LSTM weights, gates stacked input/forget/cell/output."""

    def __init__(self, w_x, w_h, bias):
        if w_x.shape[0] != w_h.shape[0] or w_x.shape[0] != bias.shape[0] or w_x.shape[0] != 4 * w_h.shape[1]:
            raise T.ShapeError(f"inconsistent LSTM shapes: w_x {w_x.shape}, w_h {w_h.shape}, bias {bias.shape}")
        self.w_x = w_x
        self.w_h = w_h
        self.bias = bias

    @property
    def units(self):
        return self.w_h.shape[1]

    @property
    def input_dim(self):
        return self.w_x.shape[1]

    @classmethod
    def create(cls, input_dim, units, rng, dtype=T.DEFAULT_DTYPE):
        w_x = T.glorot(rng, (4 * units, input_dim), dtype)
        w_h = T.glorot(rng, (4 * units, units), dtype)
        b = np.zeros(4 * units, dtype=dtype)
        b[units:2 * units] = 1.0  # forget gate opens at init
        return cls(w_x, w_h, T.Tensor(b, requires_grad=True))


def lstm_step(x_t, h_prev, c_prev, p):
    """One LSTM recurrence: sigmoid input/forget/output gates, tanh candidate."""
    u = p.units
    z = T.add(T.add(T.matmul(p.w_x, x_t), T.matmul(p.w_h, h_prev)), p.bias)
    i = T.sigmoid(T.slice_rows(z, 0, u))
    f = T.sigmoid(T.slice_rows(z, u, 2 * u))
    g = T.tanh_elem(T.slice_rows(z, 2 * u, 3 * u))
    o = T.sigmoid(T.slice_rows(z, 3 * u, 4 * u))
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    h = T.mul(o, T.tanh_elem(c))
    return h, c


@dataclass
class HiddenStates:
    """n-by-2u hidden-state matrix plus its token mask (True = real token)."""

    h: T.Tensor
    mask: np.ndarray

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def width(self):
        return self.h.shape[1]


def bilstm(s, mask, p_fwd, p_bwd):
    """Run both LSTM directions over the real tokens of an embedded sentence.

    The forward scan runs left to right, the backward scan starts from the
    last real token; per-position states are concatenated and padded rows of
    the result are zero, so padding cannot influence any real position.
    """
    mask = np.asarray(mask, dtype=bool)
    n = s.shape[0]
    if n == 0:
        raise ValueError("empty sequence")
    if mask.shape != (n,):
        raise T.ShapeError(f"mask shape {mask.shape} does not match {n} tokens")
    n_real = int(mask.sum())
    if n_real == 0:
        raise ValueError("mask leaves no real tokens")
    if not mask[:n_real].all():
        raise ValueError("padding must be contiguous at the end of the sequence")

    u = p_fwd.units
    dtype = s.dtype

    h, c = T.zeros(u, dtype), T.zeros(u, dtype)
    fwd = []
    for t in range(n_real):
        h, c = lstm_step(T.row(s, t), h, c, p_fwd)
        fwd.append(h)

    h, c = T.zeros(u, dtype), T.zeros(u, dtype)
    bwd = [None] * n_real
    for t in reversed(range(n_real)):
        h, c = lstm_step(T.row(s, t), h, c, p_bwd)
        bwd[t] = h

    rows = [T.concat([fwd[t], bwd[t]]) for t in range(n_real)]
    rows.extend(T.zeros(2 * u, dtype) for _ in range(n - n_real))
    return HiddenStates(T.concat_rows(rows), mask.copy())
