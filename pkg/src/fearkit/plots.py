"""Figure rendering for the report paths (always written next to the data files)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_training_curves(history: Sequence, path: str | Path) -> None:
    epochs = [rec.epoch for rec in history]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].plot(epochs, [rec.loss for rec in history], lw=2)
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("training loss")
    axes[0].grid(True, alpha=0.3)
    axes[1].plot(epochs, [rec.val_accuracy for rec in history], lw=2, label="validation")
    axes[1].plot(epochs, [rec.train_accuracy for rec in history], lw=2,
                 ls="--", label="train")
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("accuracy")
    axes[1].set_ylim(0, 1.02)
    axes[1].legend()
    axes[1].grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_confusion_matrix(confusion: np.ndarray, path: str | Path) -> None:
    confusion = np.asarray(confusion)
    n = confusion.shape[0]
    fig, ax = plt.subplots(figsize=(1.2 * n + 2, 1.0 * n + 2))
    im = ax.imshow(confusion, cmap="Blues")
    for i in range(n):
        for j in range(n):
            ax.text(j, i, str(confusion[i, j]), ha="center", va="center",
                    color="black" if confusion[i, j] < confusion.max() / 2 else "white")
    ax.set_xlabel("predicted level")
    ax.set_ylabel("true level")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_class_distribution(stats, path: str | Path) -> None:
    levels = [lv.level for lv in stats.levels]
    ratios = [lv.ratio for lv in stats.levels]
    hr = [lv.heart_rate_mean for lv in stats.levels]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].bar(levels, ratios, color="#4878a8")
    axes[0].set_xlabel("fear level")
    axes[0].set_ylabel("fraction of frames")
    axes[0].grid(True, axis="y", alpha=0.3)
    axes[1].plot(levels, hr, "o-", lw=2)
    axes[1].set_xlabel("fear level")
    axes[1].set_ylabel("mean heart rate (bpm)")
    axes[1].grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
