"""Matplotlib rendering of experiment rows (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_rows(rows, path) -> Path:
    """Mean error per class on a log scale, one line per (n, r) size."""
    path = Path(path)
    labels = list(dict.fromkeys(row.label for row in rows))
    sizes = list(dict.fromkeys((row.n, row.r) for row in rows))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(labels) + 3), 4.0))
    for n, r in sizes:
        pts = [(labels.index(row.label), row.mean) for row in rows
               if (row.n, row.r) == (n, r) and row.mean > 0]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=f"n={n}, r={r}")
    ax.set_yscale("log")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("mean error norm")
    ax.grid(True, which="both", alpha=0.3)
    if sizes:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
