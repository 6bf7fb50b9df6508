"""Figure rendering for simulation reports (static files, PNG/SVG/PDF)."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import RunMetrics


def plot_comparison(rows: Sequence[tuple[str, int | None, RunMetrics]], path) -> None:
    """Bar chart of hit ratios plus an I/O panel, one bar per policy."""
    labels = [label for label, _, _ in rows]
    ratios = [m.hit_ratio for _, _, m in rows]
    reads = [m.disk_reads for _, _, m in rows]
    writes = [m.disk_writes for _, _, m in rows]

    fig, (ax_hr, ax_io) = plt.subplots(1, 2, figsize=(11, 4.2))
    bars = ax_hr.bar(labels, ratios, color="tab:blue")
    ax_hr.set_ylabel("hit ratio")
    ax_hr.set_ylim(0.0, 1.0)
    ax_hr.bar_label(bars, fmt="%.4f", fontsize=8)
    ax_hr.tick_params(axis="x", rotation=30)

    x = range(len(labels))
    width = 0.4
    ax_io.bar([i - width / 2 for i in x], reads, width, label="disk reads", color="tab:orange")
    ax_io.bar([i + width / 2 for i in x], writes, width, label="disk writes", color="tab:green")
    ax_io.set_xticks(list(x), labels, rotation=30)
    ax_io.set_ylabel("operations")
    ax_io.legend()

    fig.suptitle("Policy comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(rows: Sequence[tuple[str, int | None, RunMetrics]], path) -> None:
    """Hit ratio and disk I/O as the prediction horizon grows."""
    ks = [k for _, k, _ in rows]
    ratios = [m.hit_ratio for _, _, m in rows]
    reads = [m.disk_reads for _, _, m in rows]
    writes = [m.disk_writes for _, _, m in rows]

    fig, (ax_hr, ax_io) = plt.subplots(1, 2, figsize=(11, 4.2))
    ax_hr.plot(ks, ratios, marker="o", color="tab:blue")
    ax_hr.set_xlabel("prediction horizon k")
    ax_hr.set_ylabel("hit ratio")
    ax_hr.grid(True, alpha=0.3)

    ax_io.plot(ks, reads, marker="o", label="disk reads", color="tab:orange")
    ax_io.plot(ks, writes, marker="s", label="disk writes", color="tab:green")
    ax_io.set_xlabel("prediction horizon k")
    ax_io.set_ylabel("operations")
    ax_io.grid(True, alpha=0.3)
    ax_io.legend()

    fig.suptitle("Horizon sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_accuracy(table: Mapping[int, float], path, label: str = "forecaster") -> None:
    """Accuracy as a function of the horizon k."""
    ks = sorted(table)
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(ks, [table[k] for k in ks], marker="o", label=label)
    ax.set_xlabel("prediction horizon k")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
