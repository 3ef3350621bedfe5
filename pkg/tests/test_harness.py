"""Harness: config validation, training loop, evaluation, compare, CLI."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from tsfuse.cli import main as cli_main
from tsfuse.events import Dataset, serialize_dataset
from tsfuse.harness import (CompatibilityError, ConfigError, RunConfig,
                            compare, config_from_dict, evaluate, load_config,
                            load_checkpoint, train)
from tsfuse.metrics import UndefinedMetricError
from tsfuse.report import CSV_HEADER
from tsfuse.synth import SynthSpec, generate_dataset


def _make_data(tmp_path, n=120, seed=5, positive_rate=0.4, prefix="d",
               **spec_kw):
    spec = SynthSpec(n_sequences=n, seq_len_range=(10, 16), n_event_types=4,
                     positive_rate=positive_rate, signal_type_count=2,
                     signal_rate=0.2, seed=seed, **spec_kw)
    ds = generate_dataset(spec)
    cut1, cut2 = int(0.7 * n), int(0.8 * n)
    paths = {}
    for name, seqs in (("train", ds.sequences[:cut1]),
                       ("valid", ds.sequences[cut1:cut2]),
                       ("eval", ds.sequences[cut2:])):
        p = tmp_path / f"{prefix}_{name}.jsonl"
        serialize_dataset(Dataset(seqs), p)
        paths[name] = str(p)
    return paths


def _small_config(tmp_path, paths, **kw):
    defaults = dict(model="lstm", d_model=8, hidden=6, lr=1e-2, batch_size=32,
                    epochs=2, max_seq_len=50, seed=1,
                    train_path=paths["train"], valid_path=paths["valid"],
                    eval_path=paths["eval"],
                    checkpoint_path=str(tmp_path / "m.ckpt"))
    defaults.update(kw)
    return RunConfig(**defaults)


# -- config ---------------------------------------------------------------------


def test_empty_config_file_gives_defaults(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("")
    cfg = load_config(p)
    assert cfg.d_model == 256
    assert cfg.lr == 1e-4
    assert cfg.batch_size == 128
    assert cfg.seed == 1
    assert cfg.model == "fglstm"


def test_unknown_key_named_in_error():
    with pytest.raises(ConfigError) as e:
        config_from_dict({"learning_rate": 0.1})
    assert "learning_rate" in str(e.value)


def test_bad_enum_lists_valid_values():
    with pytest.raises(ConfigError) as e:
        config_from_dict({"model": "transformer"})
    msg = str(e.value)
    for name in ("lstm", "bilstm", "phased", "fglstm"):
        assert name in msg


def test_negative_lr_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"lr": -1.0})


def test_non_object_config_rejected(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


def test_odd_d_model_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"d_model": 7})


# -- training -------------------------------------------------------------------


def test_train_writes_checkpoint_log_and_curve(tmp_path):
    paths = _make_data(tmp_path)
    cfg = _small_config(tmp_path, paths)
    summary = train(cfg)
    assert (tmp_path / "m.ckpt").exists()
    assert (tmp_path / "m.ckpt.log").exists()
    assert (tmp_path / "m.ckpt_curve.png").exists()
    assert len(summary["log"]) == 2
    log_lines = (tmp_path / "m.ckpt.log").read_text().splitlines()
    assert [json.loads(l)["epoch"] for l in log_lines] == [1, 2]


def test_train_determinism(tmp_path):
    paths = _make_data(tmp_path)
    cfg_a = _small_config(tmp_path, paths,
                          checkpoint_path=str(tmp_path / "a.ckpt"))
    cfg_b = _small_config(tmp_path, paths,
                          checkpoint_path=str(tmp_path / "b.ckpt"))
    sa, sb = train(cfg_a), train(cfg_b)
    assert sa["log"] == sb["log"]
    _, _, model_a, _ = load_checkpoint(cfg_a.checkpoint_path)
    _, _, model_b, _ = load_checkpoint(cfg_b.checkpoint_path)
    for (name_a, pa), (name_b, pb) in zip(model_a.params(), model_b.params()):
        assert name_a == name_b
        assert np.array_equal(pa.data, pb.data), name_a


def test_untrained_model_near_chance(tmp_path):
    paths = _make_data(tmp_path, n=300, seed=6)
    cfg = _small_config(tmp_path, paths, epochs=0)
    train(cfg)
    row = evaluate(cfg.checkpoint_path, paths["eval"])
    assert 0.35 <= row.auc <= 0.65


def test_checkpoint_round_trip(tmp_path):
    paths = _make_data(tmp_path)
    cfg = _small_config(tmp_path, paths, model="fglstm")
    train(cfg)
    loaded_cfg, vocab, model, vocab_hash = load_checkpoint(cfg.checkpoint_path)
    assert loaded_cfg == cfg
    assert vocab.digest() == vocab_hash
    row1 = evaluate(cfg.checkpoint_path, paths["eval"])
    row2 = evaluate(cfg.checkpoint_path, paths["eval"])
    assert row1 == row2


# -- evaluation errors ------------------------------------------------------------


def test_evaluate_single_class_dataset(tmp_path):
    paths = _make_data(tmp_path)
    cfg = _small_config(tmp_path, paths)
    train(cfg)
    all_neg = _make_data(tmp_path, n=40, seed=8, positive_rate=0.0,
                         prefix="neg")
    with pytest.raises(UndefinedMetricError):
        evaluate(cfg.checkpoint_path, all_neg["eval"])


def test_evaluate_vocab_mismatch(tmp_path):
    paths = _make_data(tmp_path)
    cfg = _small_config(tmp_path, paths)
    train(cfg)
    other = tmp_path / "other.jsonl"
    other.write_text(json.dumps({
        "seq_id": "x", "label": 1,
        "events": [{"t": 0.0, "type": "alien", "attrs": []},
                   {"t": 1.0, "type": "martian", "attrs": []}]}) + "\n")
    with pytest.raises(CompatibilityError):
        evaluate(cfg.checkpoint_path, str(other))


# -- compare ----------------------------------------------------------------------


def test_compare_empty_list_rejected():
    with pytest.raises(ConfigError):
        compare([])


def test_compare_duplicate_configs_identical_rows(tmp_path):
    paths = _make_data(tmp_path)
    a = _small_config(tmp_path, paths, checkpoint_path=str(tmp_path / "a.ckpt"))
    b = _small_config(tmp_path, paths, checkpoint_path=str(tmp_path / "b.ckpt"))
    out_csv = tmp_path / "report.csv"
    report = compare([a, b], out_csv=out_csv)
    assert len(report.rows) == 2
    assert report.rows[0] == report.rows[1]
    lines = out_csv.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    assert (tmp_path / "report.png").exists()


def test_compare_keeps_going_after_failure(tmp_path):
    paths = _make_data(tmp_path)
    good = _small_config(tmp_path, paths)
    bad = _small_config(tmp_path, paths, train_path=str(tmp_path / "nope.jsonl"),
                        checkpoint_path=str(tmp_path / "bad.ckpt"))
    report = compare([bad, good])
    assert report.rows[0].error
    assert report.rows[1].auc is not None
    text = report.to_text()
    assert "FAILED" in text
    assert "n/a" in text


# -- CLI --------------------------------------------------------------------------


def test_cli_end_to_end(tmp_path):
    runner = CliRunner()
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "n_sequences": 100, "seq_len_range": [10, 16], "n_event_types": 4,
        "positive_rate": 0.4, "signal_type_count": 2, "signal_rate": 0.2,
        "seed": 5}))
    prefix = str(tmp_path) + "/data_"
    res = runner.invoke(cli_main, ["generate", "--spec", str(spec_path),
                                   "--out-prefix", prefix, "--seed", "1"])
    assert res.exit_code == 0, res.output
    for name, count in (("train", 70), ("valid", 10), ("eval", 20)):
        p = tmp_path / f"data_{name}.jsonl"
        assert p.exists()
        assert len(p.read_text().splitlines()) == count

    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({
        "model": "lstm", "d_model": 8, "hidden": 6, "lr": 0.01,
        "batch_size": 32, "epochs": 1, "seed": 1,
        "train_path": prefix + "train.jsonl",
        "valid_path": prefix + "valid.jsonl",
        "eval_path": prefix + "eval.jsonl",
        "checkpoint_path": str(tmp_path / "cli.ckpt")}))
    res = runner.invoke(cli_main, ["train", "--config", str(cfg_path)])
    assert res.exit_code == 0, res.output
    assert "checkpoint:" in res.output

    res = runner.invoke(cli_main, ["eval", "--checkpoint",
                                   str(tmp_path / "cli.ckpt"),
                                   "--data", prefix + "eval.jsonl"])
    assert res.exit_code == 0, res.output
    assert "auc=" in res.output and "ap=" in res.output

    out_csv = tmp_path / "cmp.csv"
    res = runner.invoke(cli_main, ["compare", "--configs", str(cfg_path),
                                   "--out", str(out_csv)])
    assert res.exit_code == 0, res.output
    assert out_csv.exists()
    assert (tmp_path / "cmp.png").exists()
    assert out_csv.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_cli_eval_bad_checkpoint_is_click_error(tmp_path):
    runner = CliRunner()
    bogus = tmp_path / "bogus.ckpt"
    bogus.write_bytes(b"not a checkpoint")
    data = tmp_path / "d.jsonl"
    data.write_text(json.dumps({"seq_id": "s", "label": 0, "events": [
        {"t": 0.0, "type": "a", "attrs": []}]}) + "\n")
    res = runner.invoke(cli_main, ["eval", "--checkpoint", str(bogus),
                                   "--data", str(data)])
    assert res.exit_code != 0
    assert "Error" in res.output
