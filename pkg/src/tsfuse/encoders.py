"""Encoding primitives: type embeddings, type-conditioned value encoding,
sinusoidal function encoding, and learned convolutional time encoding.

All learned tables keep row 0 (PAD) pinned to zero: the row starts at zero
and ``mask_pad_gradients`` zeroes its gradient before every optimizer step,
so absent attribute slots contribute exactly nothing in feature space.
"""

from __future__ import annotations

import numpy as np

from .numerics import (Rng, Tensor, add, gather_rows, init_weight, init_zeros,
                       matmul, mul, parameter, reshape, tanh, tensor)
from .events import PAD_ID


class EmbeddingTable:
    """Token-id to d_model vector lookup with a zero, frozen PAD row."""

    def __init__(self, n_tokens: int, d_model: int, rng: Rng):
        self.n_tokens = n_tokens
        self.d_model = d_model
        self.rows = init_weight(rng, (n_tokens, d_model), fan_in=d_model)
        self.rows.data[PAD_ID] = 0.0

    def params(self):
        return [("rows", self.rows)]

    def mask_pad_gradients(self):
        if self.rows.grad is not None:
            self.rows.grad[PAD_ID] = 0.0


def embed_type(table: EmbeddingTable, ids) -> Tensor:
    """Look up embedding rows; `ids` may be a scalar id or an index array."""
    idx = np.atleast_1d(np.asarray(ids, dtype=np.intp))
    return gather_rows(table.rows, idx)


class ValueEncoderParams:
    """Type-conditioned affine encoding of scalar attribute values.

    Encodes a reading v of attribute type a as W[a]*v + B[a], both rows in
    R^{d_model}. PAD rows of W and B are pinned to zero so padded slots
    encode to the zero vector regardless of the value.
    """

    def __init__(self, n_attr_tokens: int, d_model: int, rng: Rng):
        self.d_model = d_model
        self.W = init_weight(rng, (n_attr_tokens, d_model), fan_in=1)
        self.B = init_zeros((n_attr_tokens, d_model))
        self.W.data[PAD_ID] = 0.0

    def params(self):
        return [("W", self.W), ("B", self.B)]

    def mask_pad_gradients(self):
        for t in (self.W, self.B):
            if t.grad is not None:
                t.grad[PAD_ID] = 0.0


def encode_value(params: ValueEncoderParams, attr_type_ids, values) -> Tensor:
    """W[type]*value + B[type], vectorized over an index/value array."""
    idx = np.atleast_1d(np.asarray(attr_type_ids, dtype=np.intp))
    vals = np.atleast_1d(np.asarray(values, dtype=np.float64)).reshape(-1, 1)
    w = gather_rows(params.W, idx)
    b = gather_rows(params.B, idx)
    return add(mul(w, tensor(vals)), b)


def function_encode(times, d_model: int) -> np.ndarray:
    """Fixed sinusoidal time encoding; rows in [-1, 1], no parameters.

    Column 2i is sin(t / 10000^(2i/d_model)), column 2i+1 the matching
    cosine, i = 0..d_model/2-1, so the lowest frequency is exactly 1.
    """
    if d_model % 2 != 0:
        raise ValueError(f"d_model must be even, got {d_model}")
    t = np.atleast_1d(np.asarray(times, dtype=np.float64)).reshape(-1, 1)
    i = np.arange(d_model // 2, dtype=np.float64)
    freq = 1.0 / (10000.0 ** (2.0 * i / d_model))
    out = np.empty((t.shape[0], d_model))
    out[:, 0::2] = np.sin(t * freq)
    out[:, 1::2] = np.cos(t * freq)
    return out


def fe_rotation(k: float, d_model: int) -> np.ndarray:
    """Block-diagonal rotation R with FE(t+k) = FE(t) @ R for every t."""
    rot = np.zeros((d_model, d_model))
    i = np.arange(d_model // 2, dtype=np.float64)
    freq = 1.0 / (10000.0 ** (2.0 * i / d_model))
    for j, w in enumerate(freq):
        c, s = np.cos(w * k), np.sin(w * k)
        # sin(wt+wk) = sin(wt)cos(wk) + cos(wt)sin(wk); cos likewise
        rot[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, -s], [s, c]]
    return rot


class ConvTimeEncoderParams:
    """Two stacked 1x1 convolutions (position-wise affine maps) over time.

    A kernel-size-1 convolution over a length-L sequence of scalars is the
    same map applied at each position, so both layers are plain matmuls.
    """

    def __init__(self, d_model: int, rng: Rng):
        if d_model % 2 != 0:
            raise ValueError(f"d_model must be even, got {d_model}")
        half = d_model // 2
        self.d_model = d_model
        self.W1 = init_weight(rng, (1, half), fan_in=1)
        self.b1 = init_zeros((half,))
        self.W2 = init_weight(rng, (half, d_model), fan_in=half)
        self.b2 = init_zeros((d_model,))

    def params(self):
        return [("W1", self.W1), ("b1", self.b1),
                ("W2", self.W2), ("b2", self.b2)]


def conv_time_encode(params: ConvTimeEncoderParams, times) -> Tensor:
    """tanh(tanh(t@W1 + b1)@W2 + b2), row per time, output L x d_model."""
    if isinstance(times, Tensor):
        t = times
    else:
        t = tensor(np.atleast_1d(np.asarray(times, dtype=np.float64)).reshape(-1, 1))
    h = tanh(add(matmul(t, params.W1), params.b1))
    return tanh(add(matmul(h, params.W2), params.b2))
