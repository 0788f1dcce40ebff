"""Evaluation report rendering: delimited table plus figures.

The evaluate command funnels everything through here: a TSV of metric
rows for diffing, a bar chart of the headline percentages, and a
histogram of reflection rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .fileio import atomic_write


@dataclass(frozen=True)
class MetricRow:
    name: str
    value: str
    notes: str = ""


@dataclass(frozen=True)
class EvalSummary:
    rows: tuple
    percents: tuple  # (name, value in [0,1]) pairs for the bar chart
    round_buckets: tuple
    summary_line: str


def format_percent(value: float) -> str:
    """Fractions rendered as one-decimal percentages: 0.661 -> '66.1'."""
    return f"{value * 100:.1f}"


def write_metrics_tsv(path: str | Path, rows: Sequence[MetricRow]) -> None:
    with atomic_write(path) as fh:
        fh.write("metric\tvalue\tnotes\n")
        for row in rows:
            fh.write(f"{row.name}\t{row.value}\t{row.notes}\n")


def write_metric_figure(path: str | Path, percents: Sequence[tuple]) -> None:
    """Bar chart of percentage metrics (P, R, F1, ...)."""
    names = [name for name, _ in percents]
    values = [value * 100 for _, value in percents]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(names, values, color="#4878a8")
    ax.set_ylabel("percent")
    ax.set_ylim(0, max(100.0, max(values) * 1.15 if values else 100.0))
    ax.set_title("correction quality")
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.1f}",
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=9,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_rounds_figure(path: str | Path, buckets: Sequence[int]) -> None:
    """Histogram of reflection rounds needed by eventually-satisfied items."""
    labels = [str(i + 1) for i in range(len(buckets))]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, list(buckets), color="#a85448")
    ax.set_xlabel("reflection rounds")
    ax.set_ylabel("items")
    ax.set_title("rounds until the length constraint held")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(out_dir: str | Path, summary: EvalSummary) -> list:
    """Render the full report; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "metrics.tsv"]
    write_metrics_tsv(paths[0], summary.rows)
    if summary.percents:
        paths.append(out_dir / "metrics.png")
        write_metric_figure(paths[-1], summary.percents)
    paths.append(out_dir / "rounds.png")
    write_rounds_figure(paths[-1], summary.round_buckets)
    return [str(p) for p in paths]
