"""Report rendering: aligned text tables, CSV rows, and figures.

Comparison reports carry one row per trained model; AUC/AP are reported as
percentages with two decimals. The CSV column set is fixed and a bar-chart
figure is rendered next to every CSV written.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_HEADER = ["model", "time_enc", "temporal_fusion", "nontemporal_fusion",
              "auc", "ap"]


@dataclass
class ReportRow:
    model: str
    time_enc: str
    temporal_fusion: str
    nontemporal_fusion: str
    auc: float | None = None   # fractions in [0,1]; None if the run failed
    ap: float | None = None
    error: str = ""

    def pct(self, value: float | None) -> str:
        return "n/a" if value is None else f"{100.0 * value:.2f}"

    def csv_values(self) -> list[str]:
        return [self.model, self.time_enc, self.temporal_fusion,
                self.nontemporal_fusion, self.pct(self.auc), self.pct(self.ap)]


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows,
                      key=lambda r: -1.0 if r.auc is None else r.auc,
                      reverse=True)

    def to_text(self) -> str:
        header = ["rank"] + CSV_HEADER
        lines = [header]
        for rank, row in enumerate(self.sorted_rows(), start=1):
            vals = row.csv_values()
            if row.error:
                vals[-2] = vals[-1] = "n/a"
            lines.append([str(rank)] + vals)
        widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
        out = []
        for r in lines:
            out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        failed = [r for r in self.rows if r.error]
        for r in failed:
            out.append(f"# {r.model}: FAILED ({r.error})")
        return "\n".join(out) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for row in self.sorted_rows():
                w.writerow(row.csv_values())

    def render_figure(self, path) -> None:
        rows = [r for r in self.sorted_rows() if r.auc is not None]
        fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(rows) + 2), 4))
        if rows:
            names = [f"{r.model}\n{r.time_enc}/{r.temporal_fusion}" for r in rows]
            xs = range(len(rows))
            ax.bar([x - 0.2 for x in xs], [100 * r.auc for r in rows],
                   width=0.4, label="AUC %")
            ax.bar([x + 0.2 for x in xs], [100 * r.ap for r in rows],
                   width=0.4, label="AP %")
            ax.set_xticks(list(xs))
            ax.set_xticklabels(names, fontsize=8)
            ax.legend()
        ax.set_ylabel("percent")
        ax.set_title("Model comparison")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def render_training_curve(epoch_log: list[dict], path) -> None:
    """Loss and validation-AUC curves for one training run."""
    fig, ax1 = plt.subplots(figsize=(6, 4))
    epochs = [e["epoch"] for e in epoch_log]
    ax1.plot(epochs, [e["train_loss"] for e in epoch_log],
             color="tab:blue", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [e["valid_auc"] for e in epoch_log],
             color="tab:orange", label="valid AUC")
    ax2.set_ylabel("valid AUC", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_path_for(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")
