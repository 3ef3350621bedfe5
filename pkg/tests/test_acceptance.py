"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Criteria (tolerances pinned):
  1  gradient suite: every differentiable block <= 1e-4 rel. error
     (64-bit, h=1e-5) at d_model=8, hidden=6, L=5; runtime < 2 min
  2  closed-gate memory: 1000 random steps with the time gate closed leave
     the cell state bitwise unchanged
  3  reduction equivalence: gate==1 matches the peephole-LSTM step and the
     phased cell with k==1 likewise, <= 1e-12 over 100 random configurations
  4  FE linearity: a per-frequency rotation maps FE(t) to FE(t+k),
     max abs error <= 1e-9 over 100 random (t, k)
  5  metric oracles: auc / average_precision match brute force exactly on
     1000 random instances of size <= 50, ties included
  6  separable-task convergence: every model variant reaches eval AUC >= 0.95
     within 20 epochs on a 2000/300/600 strong-signal split, < 10 min total
  7  directional reproduction: feature-gated cell beats the plain LSTM on
     both AUC and AP (median of 3 seeds) on rare-signal long sequences
  8  determinism: two seed-1 train+eval runs produce byte-identical CSVs
  9  length sweep: lengths {25, 50, 100, 200} all complete; median AP is
     non-decreasing from L=25 to L=100 within a 0.02 tolerance
"""

import statistics
import time

import numpy as np
import pytest

from tsfuse.cells import (CellState, FGLSTMParams, TimeGateParams,
                          class1_probability, fg_lstm_step, gated_lstm_step,
                          lstm_step, phased_lstm_step, sequence_loss)
from tsfuse.encoders import fe_rotation, function_encode
from tsfuse.events import Dataset, serialize_dataset
from tsfuse.harness import RunConfig, compare, evaluate, train
from tsfuse.metrics import auc, average_precision
from tsfuse.model import SequenceClassifier, Batch
from tsfuse.numerics import Rng, check_gradients, tensor
from tsfuse.synth import SynthSpec, generate_dataset
from tests.test_metrics import brute_force_ap, brute_force_auc


def _report(criterion: int, ok: bool, detail: str):
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _write_splits(tmp, spec, n_train, n_valid, prefix="d"):
    ds = generate_dataset(spec)
    cut2 = n_train + n_valid
    paths = {}
    for name, seqs in (("train", ds.sequences[:n_train]),
                       ("valid", ds.sequences[n_train:cut2]),
                       ("eval", ds.sequences[cut2:])):
        p = tmp / f"{prefix}_{name}.jsonl"
        serialize_dataset(Dataset(seqs), p)
        paths[name] = str(p)
    return paths


RARE_CFG = dict(d_model=16, hidden=12, lr=2e-2, batch_size=64,
                r_on=0.5, tau_max=10.0)


def _rare_spec(seq_len_range, signal_rate, seed):
    return SynthSpec(n_sequences=900, seq_len_range=seq_len_range,
                     n_event_types=20, positive_rate=0.3,
                     signal_type_count=2, signal_rate=signal_rate, seed=seed)


# -- criterion 1: gradient suite ------------------------------------------------


def test_criterion_1_gradient_suite(tmp_path):
    started = time.time()
    d_model, hidden, L = 8, 6, 5
    spec = SynthSpec(n_sequences=4, seq_len_range=(L, L), n_event_types=3,
                     n_attr_types=2, positive_rate=0.5, seed=3)
    ds = generate_dataset(spec)
    from tsfuse.events import build_vocab
    vocab = build_vocab(ds)

    worst = 0.0
    configs = [
        ("lstm", "fe", "add", "additive"),
        ("fglstm", "fe", "add", "paper"),
        ("phased", "ce", "conv-add", "paper"),
        ("bilstm", "ce", "conv-add-flat", "additive"),
    ]
    for kind, te, tf, ntf in configs:
        model = SequenceClassifier(kind, vocab, Rng(1), d_model=d_model,
                                   hidden=hidden, time_encoding=te,
                                   temporal_fusion=tf, nontemporal_fusion=ntf,
                                   t_max=10.0, r_on=0.4, alpha=0.01,
                                   c_attr=2, c_stack=2, c_temporal=2)
        # keep ReLU pre-activations away from the kink: near-zero hidden
        # states plus zero-initialized biases would otherwise put head
        # pre-activations inside the finite-difference step
        model.head.b1.data += 0.05
        batch = Batch(ds.sequences[:2], vocab, L)
        params = [p for _, p in model.params()]
        err = check_gradients(lambda: model.forward(batch)[0], params)
        worst = max(worst, err)

    elapsed = time.time() - started
    _report(1, worst <= 1e-4 and elapsed < 120.0,
            f"max relative error {worst:.2e} over {len(configs)} "
            f"variant pipelines in {elapsed:.0f}s")


# -- criterion 2: closed-gate memory ---------------------------------------------


def test_criterion_2_closed_gate_memory():
    p = FGLSTMParams.init(6, 8, Rng(5), t_max=10.0)
    # zero leak so the closed phase is exactly zero
    p.time_gate = TimeGateParams(tau=np.ones(8), shift=np.zeros(8),
                                 r_on=0.05, alpha=0.0)
    rng = Rng(6)
    state = lstm_step(p, CellState.zeros(8), tensor(rng.normal(size=6)))
    c0, h0 = state.c.data.copy(), state.h.data.copy()
    ok = True
    for _ in range(1000):
        t = 0.06 + 0.9 * float(rng.random())  # closed phase of every unit
        state = fg_lstm_step(p, state, tensor(rng.normal(size=6)), t)
        if not (np.array_equal(state.c.data, c0)
                and np.array_equal(state.h.data, h0)):
            ok = False
            break
    _report(2, ok, "1000 closed-gate steps left (c, h) bitwise unchanged")


# -- criterion 3: reduction equivalence -------------------------------------------


def test_criterion_3_reduction_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for trial in range(100):
        d = int(rng.integers(2, 6))
        h = int(rng.integers(2, 7))
        p = FGLSTMParams.init(d, h, Rng(1000 + trial), t_max=10.0)
        # open-peak gate: tau=1, shift=0, r_on=0.5 gives k(0.25) == 1 exactly
        p.time_gate = TimeGateParams(tau=np.ones(h), shift=np.zeros(h),
                                     r_on=0.5, alpha=0.001)
        state = CellState(c=tensor(rng.normal(size=h)),
                          h=tensor(rng.normal(size=h)))
        x = tensor(rng.normal(size=d))
        ref = lstm_step(p, state, x)
        via_gate = gated_lstm_step(p, state, x, np.ones(h))
        via_phased = phased_lstm_step(p, state, x, 0.25)
        for out in (via_gate, via_phased):
            worst = max(worst,
                        float(np.max(np.abs(out.c.data - ref.c.data))),
                        float(np.max(np.abs(out.h.data - ref.h.data))))
    _report(3, worst <= 1e-12,
            f"max deviation {worst:.2e} over 100 random configurations")


# -- criterion 4: FE linearity ------------------------------------------------------


def test_criterion_4_fe_linearity():
    rng = np.random.default_rng(8)
    d = 16
    worst = 0.0
    for _ in range(100):
        t = float(rng.uniform(0.0, 500.0))
        k = float(rng.uniform(-100.0, 100.0))
        err = np.max(np.abs(function_encode(t, d) @ fe_rotation(k, d)
                            - function_encode(t + k, d)))
        worst = max(worst, float(err))
    _report(4, worst <= 1e-9, f"max abs rotation error {worst:.2e}")


# -- criterion 5: metric oracles ------------------------------------------------------


def test_criterion_5_metric_oracles():
    rng = np.random.default_rng(9)
    ok = True
    for i in range(1000):
        n = int(rng.integers(2, 51))
        if i % 2:
            scores = rng.normal(size=n)            # continuous, no ties
        else:
            scores = rng.integers(0, 5, n) / 4.0   # heavy ties
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        if auc(scores, labels) != brute_force_auc(scores, labels):
            ok = False
            break
        if average_precision(scores, labels) != brute_force_ap(scores, labels):
            ok = False
            break
    _report(5, ok, "auc and average_precision match brute force exactly "
                   "on 1000 instances")


# -- criterion 6: separable-task convergence ---------------------------------------


def test_criterion_6_convergence(tmp_path):
    started = time.time()
    spec = SynthSpec(n_sequences=2900, seq_len_range=(20, 40),
                     n_event_types=8, positive_rate=0.4,
                     signal_type_count=3, signal_rate=0.2, seed=5)
    paths = _write_splits(tmp_path, spec, 2000, 300)
    results = {}
    for kind in ("lstm", "bilstm", "phased", "fglstm"):
        gated = kind in ("phased", "fglstm")
        cfg = RunConfig(model=kind, d_model=16,
                        hidden=24 if gated else 12,
                        lr=2e-2 if gated else 1e-2,
                        batch_size=128, epochs=6, seed=1,
                        r_on=0.8, alpha=0.01, tau_max=10.0,
                        train_path=paths["train"], valid_path=paths["valid"],
                        eval_path=paths["eval"],
                        checkpoint_path=str(tmp_path / f"{kind}.ckpt"))
        train(cfg)
        results[kind] = evaluate(cfg.checkpoint_path, paths["eval"]).auc
    elapsed = time.time() - started
    ok = all(a >= 0.95 for a in results.values()) and elapsed < 600.0
    detail = ", ".join(f"{k} AUC {100 * v:.2f}" for k, v in results.items())
    _report(6, ok, f"{detail} within 6 epochs in {elapsed:.0f}s")


# -- criterion 7: directional reproduction ------------------------------------------


def _median_run(paths, tmp_path, kind, epochs):
    aucs, aps = [], []
    for seed in (1, 2, 3):
        cfg = RunConfig(model=kind, epochs=epochs, seed=seed,
                        train_path=paths["train"], valid_path=paths["valid"],
                        eval_path=paths["eval"],
                        checkpoint_path=str(tmp_path / f"{kind}{seed}.ckpt"),
                        **RARE_CFG)
        train(cfg)
        row = evaluate(cfg.checkpoint_path, paths["eval"])
        aucs.append(row.auc)
        aps.append(row.ap)
    return statistics.median(aucs), statistics.median(aps)


def test_criterion_7_directional_reproduction(tmp_path):
    spec = _rare_spec((150, 200), signal_rate=0.03, seed=23)
    paths = _write_splits(tmp_path, spec, 600, 100)
    lstm_auc, lstm_ap = _median_run(paths, tmp_path, "lstm", epochs=5)
    fg_auc, fg_ap = _median_run(paths, tmp_path, "fglstm", epochs=5)
    ok = fg_auc > lstm_auc and fg_ap > lstm_ap
    _report(7, ok,
            f"median of 3 seeds: feature-gated AUC {100 * fg_auc:.2f} / "
            f"AP {100 * fg_ap:.2f} vs LSTM AUC {100 * lstm_auc:.2f} / "
            f"AP {100 * lstm_ap:.2f}")


# -- criterion 8: determinism -----------------------------------------------------------


def test_criterion_8_csv_determinism(tmp_path):
    spec = SynthSpec(n_sequences=200, seq_len_range=(10, 16), n_event_types=4,
                     positive_rate=0.4, signal_type_count=2, signal_rate=0.2,
                     seed=5)
    paths = _write_splits(tmp_path, spec, 140, 20)
    outputs = []
    for run in ("one", "two"):
        cfg = RunConfig(model="fglstm", d_model=8, hidden=6, lr=1e-2,
                        batch_size=32, epochs=2, seed=1, r_on=0.5,
                        tau_max=10.0,
                        train_path=paths["train"], valid_path=paths["valid"],
                        eval_path=paths["eval"],
                        checkpoint_path=str(tmp_path / f"{run}.ckpt"))
        out_csv = tmp_path / f"report_{run}.csv"
        compare([cfg], out_csv=out_csv)
        outputs.append(out_csv.read_bytes())
    ok = outputs[0] == outputs[1]
    _report(8, ok, "two seed-1 train+eval runs wrote byte-identical CSVs")


# -- criterion 9: length-sweep stability --------------------------------------------


def test_criterion_9_length_sweep(tmp_path):
    medians = {}
    for L in (25, 50, 100, 200):
        spec = _rare_spec((L, L), signal_rate=0.09, seed=11)
        paths = _write_splits(tmp_path, spec, 600, 100, prefix=f"L{L}")
        medians[L] = _median_run_ap(paths, tmp_path, L)
    monotone = (medians[50] >= medians[25] - 0.02
                and medians[100] >= medians[50] - 0.02)
    detail = ", ".join(f"L={L}: AP {100 * medians[L]:.2f}"
                       for L in (25, 50, 100, 200))
    _report(9, monotone, detail + " (non-decreasing 25 -> 100, +-0.02)")


def _median_run_ap(paths, tmp_path, L):
    aps = []
    for seed in (1, 2, 3):
        cfg = RunConfig(model="fglstm", epochs=10, seed=seed,
                        train_path=paths["train"], valid_path=paths["valid"],
                        eval_path=paths["eval"],
                        checkpoint_path=str(tmp_path / f"fg{L}_{seed}.ckpt"),
                        **RARE_CFG)
        train(cfg)
        aps.append(evaluate(cfg.checkpoint_path, paths["eval"]).ap)
    return statistics.median(aps)
