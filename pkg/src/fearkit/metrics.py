"""Accuracy, recall, F1 and confusion matrices for the 6- and 2-class tasks.

Weighted recall is reported as trace/total, which is what the
support-weighted average of per-class recalls reduces to algebraically, so
``weighted recall == accuracy`` holds exactly rather than up to rounding.
Both macro and weighted averages are emitted because the averaging mode of
published numbers is ambiguous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MetricsError


@dataclass(frozen=True)
class PerClass:
    label: int
    support: int
    precision: float
    recall: float
    f1: float
    undefined: bool  # zero support and zero predictions


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    recall_macro: float
    recall_weighted: float
    precision_macro: float
    precision_weighted: float
    f1_macro: float
    f1_weighted: float
    confusion: np.ndarray  # [true, predicted] counts
    per_class: tuple

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall_macro": self.recall_macro,
            "recall_weighted": self.recall_weighted,
            "precision_macro": self.precision_macro,
            "precision_weighted": self.precision_weighted,
            "f1_macro": self.f1_macro,
            "f1_weighted": self.f1_weighted,
            "confusion": self.confusion.tolist(),
            "per_class": [vars(pc) for pc in self.per_class],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text_table(self) -> str:
        lines = [f"{'class':>5} {'support':>8} {'precision':>10} {'recall':>8} {'f1':>8}"]
        for pc in self.per_class:
            flag = " (undefined)" if pc.undefined else ""
            lines.append(f"{pc.label:>5} {pc.support:>8} {pc.precision:>10.4f} "
                         f"{pc.recall:>8.4f} {pc.f1:>8.4f}{flag}")
        lines.append("")
        lines.append(f"accuracy           {self.accuracy:.4f}")
        lines.append(f"recall    macro    {self.recall_macro:.4f}   "
                     f"weighted {self.recall_weighted:.4f}")
        lines.append(f"precision macro    {self.precision_macro:.4f}   "
                     f"weighted {self.precision_weighted:.4f}")
        lines.append(f"f1        macro    {self.f1_macro:.4f}   "
                     f"weighted {self.f1_weighted:.4f}")
        return "\n".join(lines) + "\n"


def evaluate(predictions: Sequence[int], truths: Sequence[int],
             num_classes: int) -> EvalReport:
    """Standard multi-class metrics from paired prediction/truth labels."""
    preds = np.asarray(predictions, dtype=np.int64)
    trues = np.asarray(truths, dtype=np.int64)
    if preds.shape != trues.shape or preds.ndim != 1:
        raise MetricsError(
            f"predictions and truths must be equal-length 1-D, got "
            f"{preds.shape} vs {trues.shape}")
    if len(preds) == 0:
        raise MetricsError("cannot evaluate an empty prediction set")
    for name, arr in (("prediction", preds), ("truth", trues)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise MetricsError(f"{name} label outside [0, {num_classes})")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (trues, preds), 1)
    total = int(confusion.sum())
    diag = np.diag(confusion)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)

    per_class = []
    for c in range(num_classes):
        undefined = support[c] == 0 and predicted[c] == 0
        precision = float(diag[c] / predicted[c]) if predicted[c] else 0.0
        recall = float(diag[c] / support[c]) if support[c] else 0.0
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom else 0.0
        per_class.append(PerClass(label=c, support=int(support[c]),
                                  precision=precision, recall=recall, f1=f1,
                                  undefined=bool(undefined)))

    accuracy = float(diag.sum() / total)
    return EvalReport(
        accuracy=accuracy,
        recall_macro=float(np.mean([pc.recall for pc in per_class])),
        recall_weighted=float(diag.sum() / total),
        precision_macro=float(np.mean([pc.precision for pc in per_class])),
        precision_weighted=float(
            sum(s * pc.precision for s, pc in zip(support, per_class)) / total),
        f1_macro=float(np.mean([pc.f1 for pc in per_class])),
        f1_weighted=float(sum(s * pc.f1 for s, pc in zip(support, per_class)) / total),
        confusion=confusion,
        per_class=tuple(per_class),
    )
