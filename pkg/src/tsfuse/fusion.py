"""Feature fusion: event/attribute fusion, the additive baseline, and
temporal/non-temporal fusion in its three modes.

Channel-mix layers realize 1x1 convolutions across a small channel axis:
each d_model-vector is a position, channels are mixed by a shared affine
map, so a stack of C vectors (N x d_model each) is reshaped to
(N*d_model) x C and pushed through ordinary matmuls.
"""

from __future__ import annotations

import numpy as np

from .numerics import (Rng, ShapeError, Tensor, add, concat, init_weight,
                       init_zeros, matmul, mul, reshape, tanh, tensor)
from .encoders import EmbeddingTable, ValueEncoderParams, embed_type, encode_value
from .events import N_ATTR_SLOTS


class ChannelMix:
    """Shared affine map across a channel axis (a 1x1 convolution)."""

    def __init__(self, c_in: int, c_out: int, rng: Rng, prefix: str):
        self.prefix = prefix
        self.W = init_weight(rng, (c_in, c_out), fan_in=c_in)
        self.b = init_zeros((c_out,))

    def params(self):
        return [(f"{self.prefix}.W", self.W), (f"{self.prefix}.b", self.b)]

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.W), self.b)


def _to_columns(channels: list[Tensor]) -> Tensor:
    """Stack C tensors of shape N x d into an (N*d) x C matrix."""
    n, d = channels[0].shape
    cols = [reshape(c, (n * d, 1)) for c in channels]
    return concat(cols, axis=1)


def _from_column(col: Tensor, n: int, d: int) -> Tensor:
    return reshape(col, (n, d))


class NonTemporalFusionParams:
    """Channel-mix stacks for the event/attribute fusion pipeline."""

    def __init__(self, rng: Rng, c_attr: int = 6, c_stack: int = 4):
        if c_attr < 2 or c_stack < 2:
            raise ValueError("channel counts must be >= 2")
        self.c_attr = c_attr
        self.c_stack = c_stack
        self.attr_up = ChannelMix(N_ATTR_SLOTS, c_attr, rng, "attr_up")
        self.attr_down = ChannelMix(c_attr, 1, rng, "attr_down")
        self.stack_up = ChannelMix(2, c_stack, rng, "stack_up")
        self.stack_down = ChannelMix(c_stack, 1, rng, "stack_down")

    def params(self):
        out = []
        for cm in (self.attr_up, self.attr_down, self.stack_up, self.stack_down):
            out.extend(cm.params())
        return out


def _attr_slot_features(attr_type_ids, attr_values, attr_table: EmbeddingTable,
                        value_encoder: ValueEncoderParams) -> list[Tensor]:
    """Per slot j: V_t(type_j) elementwise-times V_u(type_j, value_j)."""
    ids = np.atleast_2d(np.asarray(attr_type_ids, dtype=np.intp))
    vals = np.atleast_2d(np.asarray(attr_values, dtype=np.float64))
    if ids.shape[1] != N_ATTR_SLOTS or vals.shape != ids.shape:
        raise ShapeError(
            f"expected {N_ATTR_SLOTS} normalized attribute slots, "
            f"got ids {ids.shape} / values {vals.shape}")
    feats = []
    for j in range(N_ATTR_SLOTS):
        vt = embed_type(attr_table, ids[:, j])
        vu = encode_value(value_encoder, ids[:, j], vals[:, j])
        feats.append(mul(vt, vu))
    return feats


def fuse_nontemporal(event_emb: Tensor, attr_type_ids, attr_values,
                     params: NonTemporalFusionParams,
                     attr_table: EmbeddingTable,
                     value_encoder: ValueEncoderParams) -> Tensor:
    """Fuse an event embedding with its 3 attribute slots into one vector.

    Steps: slot features (elementwise V_t*V_u), 3-channel up/tanh/down mix,
    then stack [event; attribute] and mix 2 channels down to one. Works on
    batches: event_emb is N x d_model, ids/values are N x 3.
    """
    n, d = event_emb.shape
    feats = _attr_slot_features(attr_type_ids, attr_values,
                                attr_table, value_encoder)
    stacked = _to_columns(feats)
    attr_col = params.attr_down(tanh(params.attr_up(stacked)))
    attr_feat = _from_column(attr_col, n, d)

    pair = _to_columns([event_emb, attr_feat])
    out_col = params.stack_down(tanh(params.stack_up(pair)))
    return _from_column(out_col, n, d)


def fuse_additive_baseline(event_emb: Tensor, attr_type_ids, attr_values,
                           attr_table: EmbeddingTable,
                           value_encoder: ValueEncoderParams) -> Tensor:
    """Comparison baseline: event_emb + sum over slots of V_t*V_u."""
    feats = _attr_slot_features(attr_type_ids, attr_values,
                                attr_table, value_encoder)
    out = event_emb
    for f in feats:
        out = add(out, f)
    return out


class TemporalFusionParams:
    """Parameters for fusing temporal and non-temporal feature streams."""

    MODES = ("add", "conv-add", "conv-add-flat")

    def __init__(self, mode: str, rng: Rng, c_temporal: int = 4):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}, got {mode!r}")
        self.mode = mode
        self.up = None
        self.down = None
        if mode == "conv-add":
            self.up = ChannelMix(2, c_temporal, rng, "temporal_up")
            self.down = ChannelMix(c_temporal, 1, rng, "temporal_down")
        elif mode == "conv-add-flat":
            # "without dimension upgrading": straight 2 -> 1 mix, then tanh
            self.down = ChannelMix(2, 1, rng, "temporal_flat")

    def params(self):
        out = []
        for cm in (self.up, self.down):
            if cm is not None:
                out.extend(cm.params())
        return out


def fuse_temporal(x: Tensor, t_enc: Tensor, params: TemporalFusionParams) -> Tensor:
    """Fuse non-temporal features with a time encoding, position-wise."""
    if x.shape != t_enc.shape:
        raise ShapeError(f"shape mismatch: features {x.shape} vs "
                         f"time encoding {t_enc.shape}")
    if params.mode == "add":
        return add(x, t_enc)
    n, d = x.shape
    pair = _to_columns([x, t_enc])
    if params.mode == "conv-add":
        col = params.down(tanh(params.up(pair)))
    else:
        col = tanh(params.down(pair))
    return _from_column(col, n, d)
