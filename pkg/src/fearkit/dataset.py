"""Assemble the 61-dim feature table, window it into sequences, and split.

Dataset CSV schema (one file per session, plus a roster manifest):

    frame_index, s0..s32, a0..a25, hr, br, label_a, label_b, ..., label_fused

Skeleton columns are the PCA projection, audio columns follow
:data:`fearkit.audio_features.FEATURE_NAMES` order, and there is one label
column per annotator (letters assigned in roster order) plus the fused one.
"""

from __future__ import annotations

import enum
import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DatasetError

NUM_SKELETON_FEATURES = 33
NUM_AUDIO_FEATURES = 26
NUM_PHYSIO_FEATURES = 2
NUM_FEATURES = NUM_SKELETON_FEATURES + NUM_AUDIO_FEATURES + NUM_PHYSIO_FEATURES
DEFAULT_SEQUENCE_LENGTH = 16
ROSTER_SCHEMA_VERSION = 1


def annotator_column_names(n: int) -> list[str]:
    if not (1 <= n <= len(string.ascii_lowercase)):
        raise DatasetError(f"cannot name {n} annotator columns")
    return [f"label_{string.ascii_lowercase[i]}" for i in range(n)]


def dataset_header(n_annotators: int, n_skeleton: int = NUM_SKELETON_FEATURES) -> str:
    cols = ["frame_index"]
    cols += [f"s{i}" for i in range(n_skeleton)]
    cols += [f"a{i}" for i in range(NUM_AUDIO_FEATURES)]
    cols += ["hr", "br"]
    cols += annotator_column_names(n_annotators)
    cols += ["label_fused"]
    return ",".join(cols)


@dataclass(frozen=True)
class FeatureFrame:
    """One frame's fused feature vector plus its label."""

    frame_index: int
    skeleton: np.ndarray
    audio: np.ndarray
    physio: np.ndarray
    label: int

    def __post_init__(self):
        if (self.skeleton.shape, self.audio.shape, self.physio.shape) != (
                (NUM_SKELETON_FEATURES,), (NUM_AUDIO_FEATURES,), (NUM_PHYSIO_FEATURES,)):
            raise DatasetError("feature frame has wrong component widths")
        vec = self.features
        if not np.all(np.isfinite(vec)):
            raise DatasetError(f"frame {self.frame_index} has non-finite features")
        if not (0 <= self.label <= 5):
            raise DatasetError(f"frame {self.frame_index} label {self.label} outside [0, 5]")

    @property
    def features(self) -> np.ndarray:
        return np.concatenate([self.skeleton, self.audio, self.physio])


@dataclass(frozen=True)
class SessionFeatures:
    """Per-session feature table: features (n, 61), labels (n, annotators + fused)."""

    session_id: str
    frame_index: np.ndarray
    features: np.ndarray
    annotator_labels: np.ndarray  # (n, k) in roster order
    fused_labels: np.ndarray      # (n,)
    annotators: tuple

    def __post_init__(self):
        n = len(self.frame_index)
        if self.features.shape != (n, NUM_FEATURES):
            raise DatasetError(
                f"features shape {self.features.shape} != ({n}, {NUM_FEATURES})")
        if self.annotator_labels.shape != (n, len(self.annotators)):
            raise DatasetError("annotator label matrix does not match roster")
        if self.fused_labels.shape != (n,):
            raise DatasetError("fused labels length mismatch")
        if not np.all(np.isfinite(self.features)):
            raise DatasetError("session features contain non-finite values")

    @property
    def frame_count(self) -> int:
        return len(self.frame_index)


def write_dataset_csv(session: SessionFeatures, comment: str | None = None) -> str:
    out = []
    if comment:
        out.append(f"# {comment}")
    out.append(dataset_header(len(session.annotators)))
    for i in range(session.frame_count):
        cells = [str(int(session.frame_index[i]))]
        cells.extend(repr(float(v)) for v in session.features[i])
        cells.extend(str(int(v)) for v in session.annotator_labels[i])
        cells.append(str(int(session.fused_labels[i])))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def read_dataset_csv(text: str, session_id: str,
                     annotators: Sequence[str]) -> SessionFeatures:
    rows = [line for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise DatasetError("empty dataset CSV")
    expected = dataset_header(len(annotators))
    if rows[0] != expected:
        raise DatasetError("unexpected dataset CSV header")
    k = len(annotators)
    width = 1 + NUM_FEATURES + k + 1
    frame_index, feats, ann, fused = [], [], [], []
    for line in rows[1:]:
        cells = line.split(",")
        if len(cells) != width:
            raise DatasetError(f"expected {width} columns, got {len(cells)}")
        frame_index.append(int(cells[0]))
        feats.append([float(c) for c in cells[1:1 + NUM_FEATURES]])
        ann.append([int(c) for c in cells[1 + NUM_FEATURES:1 + NUM_FEATURES + k]])
        fused.append(int(cells[-1]))
    return SessionFeatures(
        session_id=session_id,
        frame_index=np.array(frame_index, dtype=np.int64),
        features=np.array(feats, dtype=np.float64),
        annotator_labels=np.array(ann, dtype=np.int64).reshape(len(ann), k),
        fused_labels=np.array(fused, dtype=np.int64),
        annotators=tuple(annotators),
    )


def write_roster_manifest(path: str | Path, sessions: Sequence[str],
                          annotators: Sequence[str], config_hash: str,
                          extras: dict | None = None) -> None:
    doc = {
        "schema_version": ROSTER_SCHEMA_VERSION,
        "sessions": sorted(sessions),
        "annotators": list(annotators),
        "annotator_columns": dict(zip(annotator_column_names(len(annotators)), annotators)),
        "config_hash": config_hash,
    }
    if extras:
        doc.update(extras)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_roster_manifest(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != ROSTER_SCHEMA_VERSION:
        raise DatasetError(f"unsupported roster schema_version {doc.get('schema_version')}")
    return doc


@dataclass(frozen=True)
class SequenceSample:
    """A window of consecutive frames labeled by its first frame.

    Dataset windows are (length, 61); the width contract comes from the
    SessionFeatures they are sliced from, so the container itself only
    requires a 2-D matrix (the classifier is reused at other widths).
    """

    features: np.ndarray
    target: int
    session_id: str
    start_frame: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] < 1:
            raise DatasetError(f"sample features shape {self.features.shape} is invalid")


def window(session: SessionFeatures, length: int = DEFAULT_SEQUENCE_LENGTH,
           stride: int = 1) -> list[SequenceSample]:
    """Slice one session into dense windows; target = first frame's fused label."""
    if length < 1 or stride < 1:
        raise DatasetError("length and stride must be positive")
    n = session.frame_count
    if n < length:
        raise DatasetError(
            f"session {session.session_id} has {n} frames, fewer than window length {length}")
    samples = []
    for start in range(0, n - length + 1, stride):
        samples.append(SequenceSample(
            features=session.features[start:start + length],
            target=int(session.fused_labels[start]),
            session_id=session.session_id,
            start_frame=int(session.frame_index[start]),
        ))
    return samples


def window_sessions(sessions: Sequence[SessionFeatures],
                    length: int = DEFAULT_SEQUENCE_LENGTH,
                    stride: int = 1) -> list[SequenceSample]:
    out: list[SequenceSample] = []
    for session in sorted(sessions, key=lambda s: s.session_id):
        out.extend(window(session, length=length, stride=stride))
    return out


class SplitMode(enum.Enum):
    PER_SAMPLE = "per_sample"
    PER_SESSION = "per_session"


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    validation: float = 0.1
    test: float = 0.1
    seed: int = 0
    mode: SplitMode = SplitMode.PER_SAMPLE

    def __post_init__(self):
        total = self.train + self.validation + self.test
        if abs(total - 1.0) > 1e-9:
            raise DatasetError(f"split fractions must sum to 1, got {total}")
        if min(self.train, self.validation, self.test) < 0:
            raise DatasetError("split fractions must be nonnegative")


def split(samples: Sequence[SequenceSample], spec: SplitSpec
          ) -> tuple[list[SequenceSample], list[SequenceSample], list[SequenceSample]]:
    """Deterministic train/validation/test split.

    per_sample shuffles all windows and cuts at ``floor(n * cumfrac)``
    boundaries. per_session shuffles whole sessions and assigns each to the
    earliest split whose cumulative boundary its windows still fit under, so
    train gets the largest session prefix not exceeding its fraction.
    """
    samples = list(samples)
    n = len(samples)
    if n < 10:
        raise DatasetError(f"need at least 10 samples to split, got {n}")
    rng = np.random.default_rng(spec.seed)
    b1 = int(n * spec.train)
    b2 = int(n * (spec.train + spec.validation))
    if spec.mode is SplitMode.PER_SAMPLE:
        order = rng.permutation(n)
        train = [samples[i] for i in order[:b1]]
        val = [samples[i] for i in order[b1:b2]]
        test = [samples[i] for i in order[b2:]]
    else:
        session_ids = sorted({s.session_id for s in samples})
        order = [session_ids[i] for i in rng.permutation(len(session_ids))]
        by_session = {sid: [s for s in samples if s.session_id == sid] for sid in order}
        train, val, test = [], [], []
        placed = 0
        for sid in order:
            group = by_session[sid]
            if placed + len(group) <= b1 and len(test) == 0 and len(val) == 0:
                train.extend(group)
            elif placed + len(group) <= b2 and len(test) == 0:
                val.extend(group)
            else:
                test.extend(group)
            placed += len(group)
    for name, part in (("train", train), ("validation", val), ("test", test)):
        if not part:
            raise DatasetError(f"{name} split is empty; adjust fractions or data size")
    return train, val, test


@dataclass(frozen=True)
class LevelStats:
    level: int
    count: int
    ratio: float
    heart_rate_mean: float
    heart_rate_std: float
    breath_rate_mean: float
    breath_rate_std: float
    acceleration_mean: float
    acceleration_std: float


@dataclass(frozen=True)
class ClassStats:
    total: int
    levels: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "levels": [vars(lv) for lv in self.levels],
        }

    def to_text_table(self) -> str:
        head = (f"{'level':>5} {'count':>9} {'ratio':>8} {'hr_mean':>8} {'hr_std':>8} "
                f"{'br_mean':>8} {'br_std':>8} {'acc_mean':>9} {'acc_std':>9}")
        rows = [head]
        for lv in self.levels:
            rows.append(
                f"{lv.level:>5} {lv.count:>9} {lv.ratio:>8.4f} "
                f"{lv.heart_rate_mean:>8.2f} {lv.heart_rate_std:>8.2f} "
                f"{lv.breath_rate_mean:>8.2f} {lv.breath_rate_std:>8.2f} "
                f"{lv.acceleration_mean:>9.4f} {lv.acceleration_std:>9.4f}")
        rows.append(f"total frames: {self.total}")
        return "\n".join(rows)


def skeleton_acceleration(keypoints: np.ndarray) -> np.ndarray:
    """Per-frame joint-averaged magnitude of the second finite difference.

    The first and last frame copy the nearest interior value; fewer than 3
    frames yields zeros.
    """
    keypoints = np.asarray(keypoints, dtype=np.float64)
    n = keypoints.shape[0]
    if n < 3:
        return np.zeros(n)
    second = keypoints[2:] - 2.0 * keypoints[1:-1] + keypoints[:-2]
    magnitude = np.linalg.norm(second, axis=2).mean(axis=1)
    return np.concatenate([[magnitude[0]], magnitude, [magnitude[-1]]])


def class_stats(labels: np.ndarray, heart_rate: np.ndarray, breath_rate: np.ndarray,
                keypoints: np.ndarray) -> ClassStats:
    """Per-level counts, ratios, and physiology/motion statistics.

    Standard deviations are population (ddof=0). Empty levels report zero
    statistics but keep their row so ratios always cover levels 0..5.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise DatasetError("no labeled frames")
    if not (len(heart_rate) == len(breath_rate) == n and keypoints.shape[0] == n):
        raise DatasetError("stats inputs must have one entry per frame")
    accel = skeleton_acceleration(keypoints)
    levels = []
    for level in range(6):
        mask = labels == level
        count = int(mask.sum())
        if count:
            stats = (float(np.mean(heart_rate[mask])), float(np.std(heart_rate[mask])),
                     float(np.mean(breath_rate[mask])), float(np.std(breath_rate[mask])),
                     float(np.mean(accel[mask])), float(np.std(accel[mask])))
        else:
            stats = (0.0,) * 6
        levels.append(LevelStats(level, count, count / n, *stats))
    return ClassStats(total=n, levels=tuple(levels))


@dataclass(frozen=True)
class Normalization:
    """Per-column z-score statistics fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalization":
        return cls(mean=np.array(doc["mean"]), std=np.array(doc["std"]))


def fit_normalization(samples: Sequence[SequenceSample]) -> Normalization:
    if not samples:
        raise DatasetError("cannot fit normalization on an empty split")
    stacked = np.concatenate([s.features for s in samples], axis=0)
    std = stacked.std(axis=0)
    return Normalization(mean=stacked.mean(axis=0), std=np.maximum(std, 1e-8))
