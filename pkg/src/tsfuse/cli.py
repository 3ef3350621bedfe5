"""Command line interface: generate / train / eval / compare."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import harness
from .events import serialize_dataset, Dataset
from .synth import SynthSpec, generate_dataset


@click.group()
def main():
    """Feature-fusion models for multimodal irregular time-series."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON generator spec.")
@click.option("--out-prefix", required=True,
              help="Prefix for train/valid/eval .jsonl output files.")
@click.option("--seed", type=int, default=None,
              help="Override the spec's seed.")
def generate(spec_path, out_prefix, seed):
    """Generate a synthetic dataset and split it 7:1:2."""
    with open(spec_path, encoding="utf-8") as fh:
        spec = SynthSpec.from_dict(json.load(fh))
    if seed is not None:
        spec.seed = seed
    ds = generate_dataset(spec)
    n = len(ds)
    n_train = round(0.7 * n)
    n_valid = round(0.1 * n)
    splits = {
        "train": Dataset(ds.sequences[:n_train]),
        "valid": Dataset(ds.sequences[n_train:n_train + n_valid]),
        "eval": Dataset(ds.sequences[n_train + n_valid:]),
    }
    prefix = Path(out_prefix)
    if prefix.suffix == "" and str(out_prefix).endswith(("/", "\\")):
        prefix.mkdir(parents=True, exist_ok=True)
    else:
        prefix.parent.mkdir(parents=True, exist_ok=True)
    for name, split in splits.items():
        path = Path(f"{out_prefix}{name}.jsonl")
        serialize_dataset(split, path)
        click.echo(f"wrote {len(split)} sequences to {path}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="JSON run config.")
def train(config_path):
    """Train one model and write the best-validation checkpoint."""
    cfg = harness.load_config(config_path)
    summary = harness.train(cfg, log_fn=click.echo)
    click.echo(f"checkpoint: {summary['checkpoint']}")
    if summary["best_valid_auc"] is not None:
        click.echo(f"best valid AUC: {100 * summary['best_valid_auc']:.2f}")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
def eval_cmd(checkpoint, data_path):
    """Evaluate a checkpoint on a dataset split."""
    try:
        row = harness.evaluate(checkpoint, data_path)
    except Exception as e:
        raise click.ClickException(str(e)) from e
    click.echo(f"model={row.model} time_enc={row.time_enc} "
               f"temporal_fusion={row.temporal_fusion} "
               f"nontemporal_fusion={row.nontemporal_fusion} "
               f"auc={row.pct(row.auc)} ap={row.pct(row.ap)}")


@main.command()
@click.option("--configs", required=True, multiple=True,
              type=click.Path(exists=True), help="One or more run configs.")
@click.option("--out", "out_csv", required=True, type=click.Path(),
              help="CSV report path; a .png figure is written alongside.")
def compare(configs, out_csv):
    """Train and evaluate several configs, emit a ranked comparison table."""
    cfgs = [harness.load_config(p) for p in configs]
    report = harness.compare(cfgs, out_csv=out_csv, log_fn=click.echo)
    click.echo(report.to_text(), nl=False)
    click.echo(f"report: {out_csv} (+ figure {harness.figure_path_for(out_csv)})")


if __name__ == "__main__":
    sys.exit(main())
