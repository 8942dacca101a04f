"""Per-frame annotator labels and their fusion into a final fear level.

Fusion rule: a level wins outright with strictly more than half the votes
(absolute majority). Otherwise the result is the average of all levels
rounded half-up, with one clamp: an average strictly between 0 and 1 becomes
1 (some annotator saw fear, so non-fear is ruled out). Both the rounding and
the clamp are done in exact integer arithmetic.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FearLevel, FrameClock
from .errors import FusionError
from .ingest import AnnotationSpan


class FusionRule(enum.Enum):
    MAJORITY = "majority"
    ROUNDED_AVERAGE = "rounded_average"


@dataclass(frozen=True)
class FrameAnnotations:
    """One frame's per-annotator levels (0 = outside every span)."""

    frame_index: int
    levels: dict  # annotator_id -> level in [0, 5]


@dataclass(frozen=True)
class FusedLabel:
    level: FearLevel
    annotator_levels: tuple
    rule: FusionRule


def spans_to_frames(spans: Sequence[AnnotationSpan], clock: FrameClock,
                    annotators: Sequence[str]) -> np.ndarray:
    """Expand spans to a (frame_count, n_annotators) level matrix.

    A frame belongs to a span when its timestamp satisfies
    ``start <= t < end``; frames outside every span are level 0.
    """
    roster = list(annotators)
    index = {a: i for i, a in enumerate(roster)}
    if len(index) != len(roster):
        raise FusionError("duplicate annotator in roster")
    out = np.zeros((clock.frame_count, len(roster)), dtype=np.int64)
    if clock.frame_count == 0:
        return out
    times = np.array([clock.boundary_ms(i) for i in range(clock.frame_count)])
    for span in spans:
        if span.annotator_id not in index:
            raise FusionError(f"span by unknown annotator {span.annotator_id!r}")
        mask = (times >= span.start) & (times < span.end)
        out[mask, index[span.annotator_id]] = span.level
    return out


def fuse(levels: Sequence[int]) -> FusedLabel:
    """Fuse one frame's annotator levels into the final label."""
    values = [int(v) for v in levels]
    if len(values) < 2:
        raise FusionError(f"need at least 2 annotator levels, got {len(values)}")
    for v in values:
        if not (0 <= v <= 5):
            raise FusionError(f"annotator level {v} outside [0, 5]")
    counts = Counter(values)
    winner, top = counts.most_common(1)[0]
    if 2 * top > len(values):
        return FusedLabel(level=FearLevel(winner), annotator_levels=tuple(values),
                          rule=FusionRule.MAJORITY)
    s, k = sum(values), len(values)
    fused = (2 * s + k) // (2 * k)  # round half-up of s/k
    if fused == 0 and s > 0:
        fused = 1
    return FusedLabel(level=FearLevel(fused), annotator_levels=tuple(values),
                      rule=FusionRule.ROUNDED_AVERAGE)


def fuse_level(levels: Sequence[int]) -> int:
    return int(fuse(levels).level)


def fuse_frames(matrix: np.ndarray) -> np.ndarray:
    """Fuse a (frames, annotators) matrix row-wise into per-frame levels."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[1] < 2:
        raise FusionError("need a (frames, >=2 annotators) matrix")
    if matrix.size and (matrix.min() < 0 or matrix.max() > 5):
        raise FusionError("annotator levels outside [0, 5]")
    n, k = matrix.shape
    onehot = np.zeros((n, 6), dtype=np.int64)
    for level in range(6):
        onehot[:, level] = (matrix == level).sum(axis=1)
    top = onehot.max(axis=1)
    winner = onehot.argmax(axis=1)
    s = matrix.sum(axis=1)
    fallback = (2 * s + k) // (2 * k)
    fallback = np.where((fallback == 0) & (s > 0), 1, fallback)
    return np.where(2 * top > k, winner, fallback).astype(np.int64)
