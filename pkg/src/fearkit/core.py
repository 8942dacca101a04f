"""Shared domain types: frame clock, fear levels, and session manifests.

All timestamps in the toolkit are integer milliseconds. The frame clock is
the common time base every modality gets resampled onto; frame index i of a
clock maps to ``start_time_ms + round(i * 1000 / frame_rate)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

MANIFEST_SCHEMA_VERSION = 1

#: Joint order of the 25-point body model (OpenPose BODY_25 convention).
JOINT_NAMES = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist",
    "LShoulder", "LElbow", "LWrist", "MidHip", "RHip",
    "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
    "REye", "LEye", "REar", "LEar", "LBigToe",
    "LSmallToe", "LHeel", "RBigToe", "RSmallToe", "RHeel",
)

NUM_JOINTS = 25
NUM_FEAR_LEVELS = 6  # 0 = non-fear, 1..5 increasing fear


@dataclass(frozen=True)
class FrameClock:
    """Video-frame time base for one session.

    Attributes:
        start_time_ms: Session start in integer milliseconds.
        frame_rate: Frames per second; must lie in (0, 1000] so that frame
            times, expressed in integer milliseconds, stay strictly
            increasing.
        frame_count: Number of frames on this clock.
    """

    start_time_ms: int
    frame_rate: float
    frame_count: int

    def __post_init__(self):
        if not (0 < self.frame_rate <= 1000):
            raise ManifestError(f"frame_rate must be in (0, 1000], got {self.frame_rate}")
        if self.frame_count < 0:
            raise ManifestError(f"frame_count must be nonnegative, got {self.frame_count}")
        if int(self.start_time_ms) != self.start_time_ms:
            raise ManifestError("start_time_ms must be an integer millisecond value")

    @property
    def duration_ms(self) -> int:
        """Span covered by the clock, start of frame 0 to end of the last frame."""
        return self.boundary_ms(self.frame_count) - self.start_time_ms

    def boundary_ms(self, i: int) -> int:
        """Time of frame boundary i, valid for 0 <= i <= frame_count."""
        return self.start_time_ms + round(i * 1000 / self.frame_rate)

    def end_time_ms(self) -> int:
        return self.boundary_ms(self.frame_count)


def frame_to_time(clock: FrameClock, i: int) -> int:
    """Map frame index ``i`` to its timestamp in integer milliseconds.

    Raises:
        IndexError: if ``i`` is outside ``[0, frame_count)``.
    """
    if not (0 <= i < clock.frame_count):
        raise IndexError(f"frame index {i} out of range [0, {clock.frame_count})")
    return clock.boundary_ms(i)


@dataclass(frozen=True, order=True)
class FearLevel:
    """Ordinal fear label: 0 = non-fear, 1 (lowest) .. 5 (highest)."""

    level: int

    def __post_init__(self):
        if not (0 <= self.level <= 5):
            raise ValueError(f"fear level must be in [0, 5], got {self.level}")

    def __int__(self) -> int:
        return self.level


@dataclass(frozen=True)
class BinaryFear:
    """Two-class recode of FearLevel: 0 stays 0, anything above becomes 1."""

    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"binary fear must be 0 or 1, got {self.value}")

    def __int__(self) -> int:
        return self.value


def binarize(level: FearLevel | int) -> BinaryFear:
    """Recode a 6-level fear label into the 2-class task (0 -> 0, 1..5 -> 1)."""
    value = int(level)
    if not (0 <= value <= 5):
        raise ValueError(f"fear level must be in [0, 5], got {value}")
    return BinaryFear(0 if value == 0 else 1)


@dataclass(frozen=True)
class SessionManifest:
    """Paths and clock for one recorded session.

    ``audio_start_ms`` gives the wall time of the first audio sample; it
    defaults to the clock start (recording starts with the session).
    Stream paths are interpreted relative to the manifest's directory.
    """

    session_id: str
    game_id: int
    clock: FrameClock
    keypoints_path: str
    audio_path: str
    physio_path: str
    annotations_path: str
    audio_start_ms: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.game_id not in (1, 2, 3):
            raise ManifestError(f"game_id must be 1, 2 or 3, got {self.game_id}")
        if not self.session_id:
            raise ManifestError("session_id must be a nonempty string")

    @property
    def effective_audio_start_ms(self) -> int:
        return self.clock.start_time_ms if self.audio_start_ms is None else self.audio_start_ms

    def to_dict(self) -> dict:
        doc = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "session_id": self.session_id,
            "game_id": self.game_id,
            "clock": {
                "start_time_ms": self.clock.start_time_ms,
                "frame_rate": self.clock.frame_rate,
                "frame_count": self.clock.frame_count,
            },
            "streams": {
                "keypoints": self.keypoints_path,
                "audio": self.audio_path,
                "physio": self.physio_path,
                "annotations": self.annotations_path,
            },
        }
        if self.audio_start_ms is not None:
            doc["audio_start_ms"] = self.audio_start_ms
        if self.extra:
            doc["extra"] = self.extra
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionManifest":
        try:
            version = doc["schema_version"]
            if version != MANIFEST_SCHEMA_VERSION:
                raise ManifestError(f"unsupported manifest schema_version {version}")
            clock = FrameClock(
                start_time_ms=doc["clock"]["start_time_ms"],
                frame_rate=doc["clock"]["frame_rate"],
                frame_count=doc["clock"]["frame_count"],
            )
            streams = doc["streams"]
            return cls(
                session_id=doc["session_id"],
                game_id=doc["game_id"],
                clock=clock,
                keypoints_path=streams["keypoints"],
                audio_path=streams["audio"],
                physio_path=streams["physio"],
                annotations_path=streams["annotations"],
                audio_start_ms=doc.get("audio_start_ms"),
                extra=doc.get("extra", {}),
            )
        except KeyError as exc:
            raise ManifestError(f"manifest missing key {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SessionManifest":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(doc)

    def resolve(self, base: str | Path, stream_path: str) -> Path:
        return Path(base) / stream_path
