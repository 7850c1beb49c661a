"""Figure rendering for the CLI report paths.

Every command that writes a machine-readable report also drops a rendered
figure next to it.  All figures go straight to files through the Agg backend,
so no display is ever needed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_training_curves(report, path) -> str:
    fig, (ax_loss, ax_metric) = plt.subplots(1, 2, figsize=(9, 3.5))
    epochs = np.arange(1, len(report.train_losses) + 1)
    ax_loss.plot(epochs, report.train_losses, label="train")
    ax_loss.plot(epochs, report.val_losses, label="val")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_metric.plot(epochs, report.val_metrics, color="tab:green")
    ax_metric.axvline(report.best_epoch + 1, color="gray", linestyle="--", linewidth=1)
    ax_metric.set_xlabel("epoch")
    ax_metric.set_ylabel("val metric")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_correlation_heatmap(matrix: np.ndarray, path, block: int | None = None) -> str:
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="viridis")
    if block:
        for b in range(block, matrix.shape[0], block):
            ax.axhline(b - 0.5, color="white", linewidth=0.6)
            ax.axvline(b - 0.5, color="white", linewidth=0.6)
    ax.set_xlabel("feature dimension")
    ax.set_ylabel("feature dimension")
    fig.colorbar(im, ax=ax, label="|correlation|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_match_histograms(histograms: dict[str, list[int]], path) -> str:
    kinds = sorted(histograms)
    if not kinds:
        kinds, data = [], np.zeros((0, 0))
    else:
        data = np.array([histograms[k] for k in kinds], dtype=np.float64)
        totals = data.sum(axis=1, keepdims=True)
        totals[totals == 0] = 1.0
        data = data / totals
    fig, ax = plt.subplots(figsize=(5, 3.5))
    im = ax.imshow(data, vmin=0.0, vmax=1.0, cmap="magma", aspect="auto")
    ax.set_yticks(range(len(kinds)), kinds)
    ax.set_xlabel("matched factor index")
    fig.colorbar(im, ax=ax, label="match frequency")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_sweep_curves(rows: list[dict], x_label: str, path) -> str:
    ok = [r for r in rows if r.get("status") == "ok"]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    panels = [("micro_f1", "Micro-F1"), ("ged_mean", "edge edit distance"), ("c_score", "C-Score")]
    xs = [r["setting"] for r in ok]
    for ax, (key, label) in zip(axes, panels):
        ys = [r.get(key) for r in ok]
        ax.plot(xs, ys, marker="o")
        ax.set_xlabel(x_label)
        ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
