"""Experiment orchestration: config loading, training, evaluation, and
multi-model comparison.

Everything downstream of a (dataset, config, seed) triple is deterministic:
batch composition is fixed by sorting sequences by length, batch order is
shuffled by the seeded RNG, and all parameter initialization draws from the
same stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, fields
from pathlib import Path

import numpy as np

from . import metrics
from .events import Dataset, Vocab, build_vocab, parse_dataset
from .model import Batch, MODEL_KINDS, TIME_ENCODINGS, SequenceClassifier, \
    score_dataset
from .fusion import TemporalFusionParams
from .numerics import Adam, NumericError, Rng
from .report import EvalReport, ReportRow, figure_path_for, \
    render_training_curve


class ConfigError(ValueError):
    """Invalid or unknown run configuration."""


class CompatibilityError(ValueError):
    """Checkpoint and dataset do not belong together."""


NONTEMPORAL_FUSIONS = ("paper", "additive")


@dataclass
class RunConfig:
    model: str = "fglstm"
    time_encoding: str = "fe"
    temporal_fusion: str = "add"
    nontemporal_fusion: str = "paper"
    d_model: int = 256
    hidden: int = 64
    lr: float = 0.0001
    batch_size: int = 128
    epochs: int = 10
    max_seq_len: int = 200
    seed: int = 1
    train_path: str = "train.jsonl"
    valid_path: str = "valid.jsonl"
    eval_path: str = "eval.jsonl"
    checkpoint_path: str = "model.ckpt"
    r_on: float = 0.05
    alpha: float = 0.001
    tau_min: float = 1.0
    tau_max: float = 0.0   # 0 means "max observed training time"

    def validate(self) -> None:
        def enum(name, value, allowed):
            if value not in allowed:
                raise ConfigError(
                    f"{name}={value!r} invalid; valid values: {sorted(allowed)}")

        enum("model", self.model, MODEL_KINDS)
        enum("time_encoding", self.time_encoding, TIME_ENCODINGS)
        enum("temporal_fusion", self.temporal_fusion, TemporalFusionParams.MODES)
        enum("nontemporal_fusion", self.nontemporal_fusion, NONTEMPORAL_FUSIONS)
        for name in ("d_model", "hidden", "lr", "batch_size", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.d_model % 2 != 0:
            raise ConfigError("d_model must be even")
        if not (0.0 < self.r_on < 1.0):
            raise ConfigError("r_on must be in (0, 1)")
        if self.alpha < 0.0:
            raise ConfigError("alpha must be >= 0")
        if self.tau_min <= 0.0 or self.tau_max < 0.0:
            raise ConfigError("tau_min must be positive and tau_max >= 0")


def config_from_dict(d: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    cfg = RunConfig(**d)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    """Read a JSON run config; missing keys fall back to defaults."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read().strip()
    obj = json.loads(text) if text else {}
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(obj)


# -- checkpoints ---------------------------------------------------------------


def build_model(cfg: RunConfig, vocab: Vocab, t_max: float) -> SequenceClassifier:
    return SequenceClassifier(
        cfg.model, vocab, Rng(cfg.seed),
        d_model=cfg.d_model, hidden=cfg.hidden,
        time_encoding=cfg.time_encoding, temporal_fusion=cfg.temporal_fusion,
        nontemporal_fusion=cfg.nontemporal_fusion, t_max=t_max,
        r_on=cfg.r_on, alpha=cfg.alpha, tau_min=cfg.tau_min,
        tau_max=cfg.tau_max if cfg.tau_max > 0 else None)


def save_checkpoint(path, cfg: RunConfig, vocab: Vocab,
                    model: SequenceClassifier) -> None:
    """Single self-describing binary file: config echo, vocab, parameters,
    and the frozen time-gate arrays."""
    arrays = {f"param:{name}": p.data for name, p in model.params()}
    arrays["tg:tau"] = model.cell.time_gate.tau
    arrays["tg:shift"] = model.cell.time_gate.shift
    if model.cell_bw is not None:
        arrays["tg_bw:tau"] = model.cell_bw.time_gate.tau
        arrays["tg_bw:shift"] = model.cell_bw.time_gate.shift
    meta = json.dumps({"config": asdict(cfg), "vocab": json.loads(vocab.to_json()),
                       "vocab_hash": vocab.digest(), "t_max": model.t_max})
    with open(path, "wb") as fh:  # keep the exact filename, no .npz suffix
        np.savez(fh, __meta__=np.frombuffer(meta.encode(), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path):
    """Rebuild (cfg, vocab, model) from a checkpoint file."""
    with np.load(_npz_path(path)) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        cfg = config_from_dict(meta["config"])
        vocab = Vocab(event_types=dict(meta["vocab"]["event_types"]),
                      attr_types=dict(meta["vocab"]["attr_types"]))
        model = build_model(cfg, vocab, meta["t_max"])
        for name, p in model.params():
            p.data[...] = data[f"param:{name}"]
        model.cell.time_gate.tau = data["tg:tau"]
        model.cell.time_gate.shift = data["tg:shift"]
        if model.cell_bw is not None:
            model.cell_bw.time_gate.tau = data["tg_bw:tau"]
            model.cell_bw.time_gate.shift = data["tg_bw:shift"]
    return cfg, vocab, model, meta["vocab_hash"]


def _npz_path(path) -> str:
    p = str(path)
    if not p.endswith(".npz") and not Path(p).exists() and Path(p + ".npz").exists():
        return p + ".npz"
    return p


# -- training ------------------------------------------------------------------


def _length_batches(ds: Dataset, vocab: Vocab, batch_size: int,
                    max_seq_len: int) -> list[Batch]:
    seqs = sorted(ds.sequences, key=lambda s: (len(s.events), s.seq_id))
    return [Batch(seqs[i:i + batch_size], vocab, max_seq_len)
            for i in range(0, len(seqs), batch_size)]


def _eval_split(model: SequenceClassifier, ds: Dataset, vocab: Vocab,
                cfg: RunConfig) -> tuple[float, float]:
    scores, labels, _ = score_dataset(model, ds, vocab, cfg.batch_size,
                                      cfg.max_seq_len)
    return metrics.auc(scores, labels), metrics.average_precision(scores, labels)


def train(cfg: RunConfig, log_fn=None) -> dict:
    """Run the training loop; writes the best-valid-AUC checkpoint.

    Returns a summary with the per-epoch log. Raises NumericError if the
    loss diverges to a non-finite value.
    """
    cfg.validate()
    say = log_fn or (lambda msg: None)
    train_ds = parse_dataset(cfg.train_path)
    valid_ds = parse_dataset(cfg.valid_path)
    vocab = build_vocab(train_ds)
    t_max = max((ev.time for seq in train_ds for ev in seq.events), default=1.0)

    model = build_model(cfg, vocab, max(t_max, 1.0))
    params = model.params()
    opt = Adam(params, lr=cfg.lr)
    rng = Rng(cfg.seed, stream=7)  # batch-order stream, separate from init
    batches = _length_batches(train_ds, vocab, cfg.batch_size, cfg.max_seq_len)

    best_auc = -1.0
    best_state = None
    epoch_log: list[dict] = []

    def snapshot():
        return [p.data.copy() for _, p in params]

    if cfg.epochs == 0:
        best_state = snapshot()

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(batches))
        total_loss = 0.0
        total_seqs = 0
        for bi in order:
            batch = batches[bi]
            opt.zero_grad()
            loss, _ = model.forward(batch)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(
                    f"training diverged: non-finite loss at epoch {epoch}")
            loss.backward()
            model.mask_pad_gradients()
            opt.step()
            total_loss += value * batch.B
            total_seqs += batch.B
        v_auc, v_ap = _eval_split(model, valid_ds, vocab, cfg)
        entry = {"epoch": epoch, "train_loss": total_loss / total_seqs,
                 "valid_auc": v_auc, "valid_ap": v_ap}
        epoch_log.append(entry)
        say(f"epoch {epoch:3d}  loss {entry['train_loss']:.4f}  "
            f"valid AUC {100 * v_auc:.2f}  AP {100 * v_ap:.2f}")
        if v_auc > best_auc:
            best_auc = v_auc
            best_state = snapshot()

    if best_state is not None:
        for (_, p), data in zip(params, best_state):
            p.data[...] = data
    save_checkpoint(cfg.checkpoint_path, cfg, vocab, model)

    log_path = Path(str(cfg.checkpoint_path) + ".log")
    with open(log_path, "w", encoding="utf-8") as fh:
        for e in epoch_log:
            fh.write(json.dumps(e) + "\n")
    if epoch_log:
        render_training_curve(epoch_log,
                              Path(str(cfg.checkpoint_path) + "_curve.png"))
    final_valid = (epoch_log[-1]["valid_auc"] if epoch_log else None)
    return {"checkpoint": str(cfg.checkpoint_path), "epochs": cfg.epochs,
            "best_valid_auc": best_auc if best_auc >= 0 else None,
            "final_valid_auc": final_valid, "log": epoch_log,
            "vocab_hash": vocab.digest()}


# -- evaluation ------------------------------------------------------------------


def evaluate(checkpoint_path, data_path) -> ReportRow:
    """AUC/AP of a checkpoint on a dataset split."""
    cfg, vocab, model, _ = load_checkpoint(checkpoint_path)
    ds = parse_dataset(data_path)
    _check_vocab_overlap(ds, vocab)
    scores, labels, _ = score_dataset(model, ds, vocab, cfg.batch_size,
                                      cfg.max_seq_len)
    return ReportRow(model=cfg.model, time_enc=cfg.time_encoding,
                     temporal_fusion=cfg.temporal_fusion,
                     nontemporal_fusion=cfg.nontemporal_fusion,
                     auc=metrics.auc(scores, labels),
                     ap=metrics.average_precision(scores, labels))


def _check_vocab_overlap(ds: Dataset, vocab: Vocab) -> None:
    seen = {ev.event_type for seq in ds for ev in seq.events}
    if seen and not (seen & set(vocab.event_types)):
        raise CompatibilityError(
            "vocab mismatch: no event type in the dataset is known to the "
            "checkpoint vocabulary")


# -- comparison --------------------------------------------------------------------


def compare(cfgs: list[RunConfig], out_csv=None, log_fn=None) -> EvalReport:
    """Train and evaluate each config; per-run failures become failed rows."""
    if not cfgs:
        raise ConfigError("compare needs at least one config")
    say = log_fn or (lambda msg: None)
    report = EvalReport()
    for i, cfg in enumerate(cfgs):
        say(f"[{i + 1}/{len(cfgs)}] training {cfg.model} "
            f"({cfg.time_encoding}/{cfg.temporal_fusion}/{cfg.nontemporal_fusion})")
        try:
            train(cfg, log_fn=log_fn)
            row = evaluate(cfg.checkpoint_path, cfg.eval_path)
        except Exception as e:  # keep remaining runs alive
            row = ReportRow(model=cfg.model, time_enc=cfg.time_encoding,
                            temporal_fusion=cfg.temporal_fusion,
                            nontemporal_fusion=cfg.nontemporal_fusion,
                            error=f"{type(e).__name__}: {e}")
        report.rows.append(row)
    if out_csv is not None:
        report.write_csv(out_csv)
        report.render_figure(figure_path_for(out_csv))
    return report
