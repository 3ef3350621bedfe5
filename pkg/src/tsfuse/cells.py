"""Recurrent cells: the feature-gated LSTM, its peephole-LSTM and
Phased-LSTM relatives, the classifier head, and the sequence loss.

All three cells share one gated update core: the peephole LSTM computes a
candidate state, and a nonnegative per-unit coefficient interpolates
between the candidate and the previous state. Coefficient 1 recovers the
plain peephole LSTM, the time gate alone gives the Phased variant, and
feature filter times time gate gives the feature-gated cell. A coefficient
of exactly 0 leaves the state bitwise untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (Rng, ShapeError, Tensor, add, clamp, exp, init_weight,
                       init_zeros, log, matmul, mul, relu, reshape, sigmoid,
                       tanh, tensor, tmean, tsum)


@dataclass
class TimeGateParams:
    """Per-unit periodic openness: period tau, phase shift, open ratio,
    and leak rate. Fixed at initialization, not gradient-trained."""
    tau: np.ndarray
    shift: np.ndarray
    r_on: float = 0.05
    alpha: float = 0.001

    @classmethod
    def init(cls, hidden: int, rng: Rng, t_max: float,
             r_on: float = 0.05, alpha: float = 0.001,
             tau_min: float = 1.0,
             tau_max: float | None = None) -> "TimeGateParams":
        """Periods log-uniform in [tau_min, tau_max or max observed time]."""
        if not (0.0 < r_on < 1.0):
            raise ValueError(f"r_on must be in (0,1), got {r_on}")
        if alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        hi = t_max if tau_max is None else tau_max
        hi = max(hi, tau_min * (1.0 + 1e-9))
        tau = np.exp(rng.uniform(np.log(tau_min), np.log(hi), hidden))
        shift = rng.uniform(0.0, 1.0, hidden) * tau
        return cls(tau=tau, shift=shift, r_on=r_on, alpha=alpha)


def time_gate(params: TimeGateParams, t) -> np.ndarray:
    """Openness k per hidden unit at time t.

    Phase phi = ((t - shift) mod tau)/tau ramps k linearly up to 1 over the
    first half of the open window, back down over the second half, and
    leaks alpha*phi when closed. `t` may be a scalar or a (B,) array, giving
    (hidden,) or (B, hidden) output.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        phi = np.mod(t[:, None] - params.shift, params.tau) / params.tau
    else:
        phi = np.mod(t - params.shift, params.tau) / params.tau
    r = params.r_on
    k = np.where(phi < r / 2.0, 2.0 * phi / r,
                 np.where(phi < r, 2.0 - 2.0 * phi / r, params.alpha * phi))
    return k


@dataclass
class FeatureGateParams:
    """Two-layer feature filter whose output width equals the hidden size."""
    W_xh: Tensor
    b_h: Tensor
    W_hs: Tensor
    b_s: Tensor

    @classmethod
    def init(cls, d_model: int, hidden: int, rng: Rng,
             filter_width: int | None = None) -> "FeatureGateParams":
        fw = hidden if filter_width is None else filter_width
        return cls(W_xh=init_weight(rng, (d_model, fw), fan_in=d_model),
                   b_h=init_zeros((fw,)),
                   W_hs=init_weight(rng, (fw, hidden), fan_in=fw),
                   b_s=init_zeros((hidden,)))

    def params(self):
        return [("fg.W_xh", self.W_xh), ("fg.b_h", self.b_h),
                ("fg.W_hs", self.W_hs), ("fg.b_s", self.b_s)]


def feature_gate(params: FeatureGateParams, x_t: Tensor, k_t) -> Tensor:
    """ReLU(W_hs tanh(W_xh x + b_h) + b_s) * k; nonnegative by construction."""
    x2 = reshape(x_t, (1, -1)) if x_t.ndim == 1 else x_t
    if x2.shape[1] != params.W_xh.shape[0]:
        raise ShapeError(f"input width {x2.shape[1]} != W_xh rows "
                         f"{params.W_xh.shape[0]}")
    inner = tanh(add(matmul(x2, params.W_xh), params.b_h))
    filt = relu(add(matmul(inner, params.W_hs), params.b_s))
    k = k_t if isinstance(k_t, Tensor) else tensor(np.asarray(k_t, dtype=np.float64))
    out = mul(filt, k)
    return reshape(out, (-1,)) if x_t.ndim == 1 else out


@dataclass
class CellState:
    c: Tensor
    h: Tensor

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "CellState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(c=tensor(np.zeros(shape)), h=tensor(np.zeros(shape)))


@dataclass
class FGLSTMParams:
    """Peephole LSTM weights plus feature-gate and time-gate parameters."""
    W_xi: Tensor; W_hi: Tensor; w_ci: Tensor; b_i: Tensor
    W_xf: Tensor; W_hf: Tensor; w_cf: Tensor; b_f: Tensor
    W_xc: Tensor; W_hc: Tensor; b_c: Tensor
    W_xo: Tensor; W_ho: Tensor; w_co: Tensor; b_o: Tensor
    feature_gate: FeatureGateParams
    time_gate: TimeGateParams
    hidden: int = 0

    @classmethod
    def init(cls, d_model: int, hidden: int, rng: Rng, t_max: float = 100.0,
             r_on: float = 0.05, alpha: float = 0.001,
             tau_min: float = 1.0,
             tau_max: float | None = None) -> "FGLSTMParams":
        def wx():
            return init_weight(rng, (d_model, hidden), fan_in=d_model)

        def wh():
            return init_weight(rng, (hidden, hidden), fan_in=hidden)

        def peep():
            return init_weight(rng, (hidden,), fan_in=hidden)

        return cls(
            W_xi=wx(), W_hi=wh(), w_ci=peep(), b_i=init_zeros((hidden,)),
            W_xf=wx(), W_hf=wh(), w_cf=peep(),
            b_f=Tensor(np.ones(hidden), requires_grad=True),  # standard forget-bias start
            W_xc=wx(), W_hc=wh(), b_c=init_zeros((hidden,)),
            W_xo=wx(), W_ho=wh(), w_co=peep(), b_o=init_zeros((hidden,)),
            feature_gate=FeatureGateParams.init(d_model, hidden, rng),
            time_gate=TimeGateParams.init(hidden, rng, t_max, r_on=r_on,
                                          alpha=alpha, tau_min=tau_min,
                                          tau_max=tau_max),
            hidden=hidden)

    def params(self):
        named = [("W_xi", self.W_xi), ("W_hi", self.W_hi), ("w_ci", self.w_ci),
                 ("b_i", self.b_i), ("W_xf", self.W_xf), ("W_hf", self.W_hf),
                 ("w_cf", self.w_cf), ("b_f", self.b_f), ("W_xc", self.W_xc),
                 ("W_hc", self.W_hc), ("b_c", self.b_c), ("W_xo", self.W_xo),
                 ("W_ho", self.W_ho), ("w_co", self.w_co), ("b_o", self.b_o)]
        named.extend(self.feature_gate.params())
        return named


def _candidate_step(p: FGLSTMParams, state: CellState, x_t: Tensor):
    """Peephole candidate updates shared by every cell variant."""
    c_prev, h_prev = state.c, state.h
    i_t = sigmoid(add(add(matmul(x_t, p.W_xi), matmul(h_prev, p.W_hi)),
                      add(mul(p.w_ci, c_prev), p.b_i)))
    f_t = sigmoid(add(add(matmul(x_t, p.W_xf), matmul(h_prev, p.W_hf)),
                      add(mul(p.w_cf, c_prev), p.b_f)))
    g_t = tanh(add(add(matmul(x_t, p.W_xc), matmul(h_prev, p.W_hc)), p.b_c))
    c_tilde = add(mul(f_t, c_prev), mul(i_t, g_t))
    return c_tilde


def gated_lstm_step(p: FGLSTMParams, state: CellState, x_t: Tensor,
                    gate) -> CellState:
    """One cell update with an explicit interpolation coefficient `gate`.

    gate 0 keeps (c, h) bitwise unchanged; gate 1 is a full peephole LSTM
    step. The output-gate peephole reads the gated cell state; the hidden
    candidate uses tanh of the pre-gate candidate.
    """
    if x_t.ndim == 1:
        x2 = reshape(x_t, (1, -1))
        inner = gated_lstm_step(
            p, CellState(c=reshape(state.c, (1, -1)), h=reshape(state.h, (1, -1))),
            x2, gate)
        return CellState(c=reshape(inner.c, (-1,)), h=reshape(inner.h, (-1,)))

    s = gate if isinstance(gate, Tensor) else tensor(np.asarray(gate, dtype=np.float64))
    c_prev, h_prev = state.c, state.h

    # gate exactly zero everywhere: skip the arithmetic so the state is
    # bitwise preserved, not merely close
    if not isinstance(gate, Tensor) and not np.any(s.data):
        return CellState(c=c_prev, h=h_prev)

    c_tilde = _candidate_step(p, state, x_t)
    one_minus_s = 1.0 - s
    c_t = add(mul(s, c_tilde), mul(one_minus_s, c_prev))
    o_t = sigmoid(add(add(matmul(x_t, p.W_xo), matmul(h_prev, p.W_ho)),
                      add(mul(p.w_co, c_t), p.b_o)))
    h_tilde = mul(o_t, tanh(c_tilde))
    h_t = add(mul(s, h_tilde), mul(one_minus_s, h_prev))
    return CellState(c=c_t, h=h_t)


def lstm_step(p: FGLSTMParams, state: CellState, x_t: Tensor) -> CellState:
    """Plain peephole LSTM: the gated core with coefficient 1."""
    batch = None if x_t.ndim == 1 else x_t.shape[0]
    shape = (p.hidden,) if batch is None else (batch, p.hidden)
    return gated_lstm_step(p, state, x_t, np.ones(shape))


def phased_lstm_step(p: FGLSTMParams, state: CellState, x_t: Tensor,
                     t) -> CellState:
    """Cell gated by the time gate alone."""
    return gated_lstm_step(p, state, x_t, time_gate(p.time_gate, t))


def fg_lstm_step(p: FGLSTMParams, state: CellState, x_t: Tensor,
                 t) -> CellState:
    """Cell gated by feature filter times time gate."""
    k_t = time_gate(p.time_gate, t)
    if not np.any(k_t):
        return CellState(c=state.c, h=state.h)
    s_t = feature_gate(p.feature_gate, x_t, k_t)
    return gated_lstm_step(p, state, x_t, s_t)


@dataclass
class HeadParams:
    """Two linear maps with a ReLU in between, softmax over 2 classes."""
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, in_width: int, rng: Rng,
             head_width: int | None = None) -> "HeadParams":
        hw = in_width if head_width is None else head_width
        return cls(W1=init_weight(rng, (in_width, hw), fan_in=in_width),
                   b1=init_zeros((hw,)),
                   W2=init_weight(rng, (hw, 2), fan_in=hw),
                   b2=init_zeros((2,)))

    def params(self):
        return [("head.W1", self.W1), ("head.b1", self.b1),
                ("head.W2", self.W2), ("head.b2", self.b2)]


def head_logits(head: HeadParams, h: Tensor) -> Tensor:
    h2 = reshape(h, (1, -1)) if h.ndim == 1 else h
    inner = relu(add(matmul(h2, head.W1), head.b1))
    return add(matmul(inner, head.W2), head.b2)


def classify(head: HeadParams, h: Tensor) -> Tensor:
    """Class probability pair for a single hidden state."""
    from .numerics import power_recip
    z = head_logits(head, h)
    z_shift = add(z, -float(np.max(z.data)))
    e = exp(z_shift)
    p = mul(e, power_recip(tsum(e)))
    return reshape(p, (2,))


def class1_probability(head: HeadParams, h: Tensor) -> Tensor:
    """P(class 1) via sigmoid of the logit difference; batched (N,2 -> N)."""
    z = head_logits(head, h)
    diff = matmul(z, tensor(np.array([[-1.0], [1.0]])))
    return reshape(sigmoid(diff), (-1,))


EPS_PROB = 1e-12


def sequence_loss(preds: Tensor, label: int) -> Tensor:
    """Binary cross-entropy of per-step class-1 probabilities against the
    sequence label broadcast to every step; mean over steps, nonnegative."""
    p = reshape(preds, (-1,))
    p = clamp(p, EPS_PROB, 1.0 - EPS_PROB)
    if label == 1:
        terms = log(p)
    else:
        terms = log(add(1.0, mul(p, -1.0)))
    return mul(tmean(terms), -1.0)


def run_sequence(model, fused_inputs: Tensor, times) -> Tensor:
    """Unroll a cell over one sequence; rows are hidden states h_1..h_L.

    `model` is anything with attributes `kind` in {"lstm","bilstm","phased",
    "fglstm"} and `cell` (FGLSTMParams). Bi-LSTM runs a second reversed pass
    and concatenates, giving L x 2*hidden.
    """
    from .numerics import concat, gather_rows
    L = fused_inputs.shape[0]
    times = np.asarray(times, dtype=np.float64)

    def one_pass(order):
        state = CellState.zeros(model.cell.hidden)
        rows = []
        for idx in order:
            x_t = reshape(gather_rows(fused_inputs, [idx]), (-1,))
            if model.kind == "fglstm":
                state = fg_lstm_step(model.cell, state, x_t, times[idx])
            elif model.kind == "phased":
                state = phased_lstm_step(model.cell, state, x_t, times[idx])
            else:
                state = lstm_step(model.cell, state, x_t)
            rows.append(reshape(state.h, (1, -1)))
        return rows

    forward = one_pass(range(L))
    if model.kind != "bilstm":
        return concat(forward, axis=0)
    backward = one_pass(range(L - 1, -1, -1))
    backward.reverse()
    both = [concat([f, b], axis=1) for f, b in zip(forward, backward)]
    return concat(both, axis=0)
