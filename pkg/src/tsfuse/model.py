"""Model assembly: encoders + fusion + recurrent cell + classifier head.

The training path is batched: sequences are padded to a common length and
every step updates a (batch, hidden) state, with padded steps masked to a
gate coefficient of zero so they leave the state untouched. Padding
therefore never changes a sequence's final hidden state.
"""

from __future__ import annotations

import numpy as np

from . import cells, encoders, fusion
from .events import Dataset, Sequence, Vocab, N_ATTR_SLOTS
from .numerics import Rng, Tensor, add, clamp, concat, gather_rows, log, mul, \
    reshape, tensor, tmean, tsum

MODEL_KINDS = ("lstm", "bilstm", "phased", "fglstm")
TIME_ENCODINGS = ("fe", "ce")


class Batch:
    """Padded arrays for a batch of sequences."""

    def __init__(self, sequences: list[Sequence], vocab: Vocab,
                 max_seq_len: int | None = None):
        seqs = sequences
        if max_seq_len:
            seqs = [self._truncate(s, max_seq_len) for s in seqs]
        B = len(seqs)
        L = max(len(s.events) for s in seqs)
        self.type_ids = np.zeros((B, L), dtype=np.intp)
        self.attr_ids = np.zeros((B, L, N_ATTR_SLOTS), dtype=np.intp)
        self.attr_vals = np.zeros((B, L, N_ATTR_SLOTS))
        self.times = np.zeros((B, L))
        self.mask = np.zeros((B, L))
        self.labels = np.zeros(B)
        for b, seq in enumerate(seqs):
            n = len(seq.events)
            self.labels[b] = seq.label
            self.mask[b, :n] = 1.0
            for t, ev in enumerate(seq.events):
                self.type_ids[b, t] = vocab.event_id(ev.event_type)
                self.times[b, t] = ev.time
                for j, a in enumerate(ev.attrs):
                    self.attr_ids[b, t, j] = vocab.attr_id(a.value_type)
                    self.attr_vals[b, t, j] = a.value_u
            if n < L:
                self.times[b, n:] = self.times[b, n - 1]
        self.B, self.L = B, L

    @staticmethod
    def _truncate(seq: Sequence, max_len: int) -> Sequence:
        if len(seq.events) <= max_len:
            return seq
        # keep the most recent events; the decision point is the last one
        return Sequence(seq_id=seq.seq_id, events=seq.events[-max_len:],
                        label=seq.label)


class SequenceClassifier:
    """One model variant wired from config flags."""

    def __init__(self, kind: str, vocab: Vocab, rng: Rng, *,
                 d_model: int = 256, hidden: int = 64,
                 time_encoding: str = "fe", temporal_fusion: str = "add",
                 nontemporal_fusion: str = "paper", t_max: float = 100.0,
                 r_on: float = 0.05, alpha: float = 0.001,
                 tau_min: float = 1.0, tau_max: float | None = None,
                 c_attr: int = 6, c_stack: int = 4, c_temporal: int = 4):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        if time_encoding not in TIME_ENCODINGS:
            raise ValueError(f"unknown time encoding {time_encoding!r}")
        self.kind = kind
        self.d_model = d_model
        self.hidden = hidden
        self.time_encoding = time_encoding
        self.nontemporal_fusion = nontemporal_fusion
        self.t_max = t_max

        self.event_table = encoders.EmbeddingTable(vocab.n_event_tokens, d_model, rng)
        self.attr_table = encoders.EmbeddingTable(vocab.n_attr_tokens, d_model, rng)
        self.value_encoder = encoders.ValueEncoderParams(vocab.n_attr_tokens,
                                                         d_model, rng)
        self.ce = (encoders.ConvTimeEncoderParams(d_model, rng)
                   if time_encoding == "ce" else None)
        self.nt = (fusion.NonTemporalFusionParams(rng, c_attr=c_attr, c_stack=c_stack)
                   if nontemporal_fusion == "paper" else None)
        self.temporal = fusion.TemporalFusionParams(temporal_fusion, rng,
                                                    c_temporal=c_temporal)
        self.cell = cells.FGLSTMParams.init(d_model, hidden, rng, t_max=t_max,
                                            r_on=r_on, alpha=alpha,
                                            tau_min=tau_min, tau_max=tau_max)
        self.cell_bw = (cells.FGLSTMParams.init(d_model, hidden, rng, t_max=t_max,
                                                r_on=r_on, alpha=alpha,
                                                tau_min=tau_min, tau_max=tau_max)
                        if kind == "bilstm" else None)
        head_in = 2 * hidden if kind == "bilstm" else hidden
        self.head = cells.HeadParams.init(head_in, rng)

    # -- parameters ----------------------------------------------------------

    def params(self) -> list[tuple[str, Tensor]]:
        named = [(f"event_table.{n}", p) for n, p in self.event_table.params()]
        named += [(f"attr_table.{n}", p) for n, p in self.attr_table.params()]
        named += [(f"value.{n}", p) for n, p in self.value_encoder.params()]
        if self.ce is not None:
            named += [(f"ce.{n}", p) for n, p in self.ce.params()]
        if self.nt is not None:
            named += [(f"nt.{n}", p) for n, p in self.nt.params()]
        named += [(f"tf.{n}", p) for n, p in self.temporal.params()]
        named += [(f"cell.{n}", p) for n, p in self.cell.params()]
        if self.cell_bw is not None:
            named += [(f"cell_bw.{n}", p) for n, p in self.cell_bw.params()]
        named += [(n, p) for n, p in self.head.params()]
        return named

    def mask_pad_gradients(self):
        self.event_table.mask_pad_gradients()
        self.attr_table.mask_pad_gradients()
        self.value_encoder.mask_pad_gradients()

    # -- forward -------------------------------------------------------------

    def fuse_events(self, batch: Batch) -> Tensor:
        """Fused per-event features, flat (B*L) x d_model."""
        N = batch.B * batch.L
        flat_types = batch.type_ids.reshape(N)
        flat_attr_ids = batch.attr_ids.reshape(N, N_ATTR_SLOTS)
        flat_attr_vals = batch.attr_vals.reshape(N, N_ATTR_SLOTS)
        flat_times = batch.times.reshape(N)

        ev = encoders.embed_type(self.event_table, flat_types)
        if self.nt is not None:
            x = fusion.fuse_nontemporal(ev, flat_attr_ids, flat_attr_vals,
                                        self.nt, self.attr_table,
                                        self.value_encoder)
        else:
            x = fusion.fuse_additive_baseline(ev, flat_attr_ids, flat_attr_vals,
                                              self.attr_table, self.value_encoder)
        if self.ce is not None:
            t_enc = encoders.conv_time_encode(self.ce, flat_times)
        else:
            t_enc = tensor(encoders.function_encode(flat_times, self.d_model))
        return fusion.fuse_temporal(x, t_enc, self.temporal)

    def _gate(self, cell: cells.FGLSTMParams, x_t: Tensor,
              t_col: np.ndarray, m_col: np.ndarray):
        """Interpolation coefficient for one step, already padding-masked."""
        B = len(t_col)
        m = m_col[:, None]
        if self.kind in ("lstm", "bilstm"):
            return np.broadcast_to(m, (B, self.hidden)).copy()
        k = cells.time_gate(cell.time_gate, t_col) * m
        if self.kind == "phased":
            return k
        return cells.feature_gate(cell.feature_gate, x_t, k)

    def _unroll(self, cell: cells.FGLSTMParams, fused: Tensor, batch: Batch,
                order) -> tuple[list[Tensor], Tensor]:
        B, L = batch.B, batch.L
        base = np.arange(B) * L
        state = cells.CellState.zeros(self.hidden, batch=B)
        hs: list[Tensor | None] = [None] * L
        for t in order:
            x_t = gather_rows(fused, base + t)
            gate = self._gate(cell, x_t, batch.times[:, t], batch.mask[:, t])
            state = cells.gated_lstm_step(cell, state, x_t, gate)
            hs[t] = state.h
        return hs, state.h

    def hidden_states(self, fused: Tensor, batch: Batch) -> tuple[list[Tensor], Tensor]:
        """Per-step hidden states and the final state, batched."""
        hs_f, final_f = self._unroll(self.cell, fused, batch, range(batch.L))
        if self.kind != "bilstm":
            return hs_f, final_f
        hs_b, _ = self._unroll(self.cell_bw, fused, batch,
                               range(batch.L - 1, -1, -1))
        final_b = hs_b[0]
        hs = [concat([f, b], axis=1) for f, b in zip(hs_f, hs_b)]
        return hs, concat([final_f, final_b], axis=1)

    def forward(self, batch: Batch) -> tuple[Tensor, np.ndarray]:
        """Training loss and final-step class-1 probabilities.

        Loss: per-step cross-entropy against the broadcast sequence label,
        averaged over valid steps per sequence, then over the batch.
        """
        fused = self.fuse_events(batch)
        hs, final_h = self.hidden_states(fused, batch)
        all_h = concat(hs, axis=0)                       # (L*B, width)
        p1 = cells.class1_probability(self.head, all_h)  # (L*B,)
        p1 = clamp(reshape(p1, (batch.L, batch.B)),
                   cells.EPS_PROB, 1.0 - cells.EPS_PROB)

        y = batch.labels                                 # (B,)
        terms = add(mul(log(p1), y), mul(log(1.0 - p1), 1.0 - y))
        masked = mul(terms, batch.mask.T)
        counts = batch.mask.sum(axis=1)                  # (B,)
        per_seq = mul(tsum(masked, axis=0), 1.0 / counts)
        loss = mul(tmean(per_seq), -1.0)

        p_final = cells.class1_probability(self.head, final_h).data
        return loss, p_final

    def predict(self, batch: Batch) -> np.ndarray:
        """Final-step class-1 probabilities only (no loss)."""
        fused = self.fuse_events(batch)
        _, final_h = self.hidden_states(fused, batch)
        return cells.class1_probability(self.head, final_h).data


def score_dataset(model: SequenceClassifier, ds: Dataset, vocab: Vocab,
                  batch_size: int, max_seq_len: int | None):
    """Scores and labels over a dataset, in batches grouped by length."""
    seqs = sorted(ds.sequences, key=lambda s: (len(s.events), s.seq_id))
    scores, labels = [], []
    ids = []
    for i in range(0, len(seqs), batch_size):
        chunk = seqs[i:i + batch_size]
        batch = Batch(chunk, vocab, max_seq_len)
        p = model.predict(batch)
        scores.extend(p.tolist())
        labels.extend(int(s.label) for s in chunk)
        ids.extend(s.seq_id for s in chunk)
    return np.array(scores), np.array(labels, dtype=np.intp), ids
