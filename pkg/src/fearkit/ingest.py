"""Parsers for raw per-session stream files.

Formats (all text is UTF-8, CSVs carry a mandatory header row):

* keypoints: ``timestamp,x0,y0,z0,...,x24,y24,z24`` - one row per camera
  frame, empty cell = joint coordinate missing.
* physio:    ``timestamp,heart_rate,breath_rate`` - nominal 2000 ms spacing.
* annotations: JSON Lines, one object per span with keys
  ``annotator_id``, ``start``, ``end``, ``level``.
* audio:     canonical 16-bit PCM WAV, mono or stereo (stereo is downmixed
  by channel mean); samples normalized to [-1, 1] by dividing by 32768.

Parsers never skip rows silently: each invalid row raises
:class:`~fearkit.errors.ParseError` naming the row. Lines starting with
``#`` are provenance comments and do not count as rows.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import NUM_JOINTS
from .errors import ParseError

KEYPOINT_HEADER = "timestamp," + ",".join(
    f"{axis}{j}" for j in range(NUM_JOINTS) for axis in ("x", "y", "z")
)
PHYSIO_HEADER = "timestamp,heart_rate,breath_rate"


@dataclass(frozen=True)
class KeypointFrame:
    """One camera frame of 25 3-D joints; a joint may be missing (None)."""

    timestamp: int
    joints: tuple  # 25 entries, each (x, y, z) or None

    def __post_init__(self):
        if len(self.joints) != NUM_JOINTS:
            raise ValueError(f"expected {NUM_JOINTS} joint slots, got {len(self.joints)}")

    @property
    def missing(self) -> tuple:
        return tuple(j for j, v in enumerate(self.joints) if v is None)


@dataclass(frozen=True)
class PhysioSample:
    timestamp: int
    heart_rate: float
    breath_rate: float


@dataclass(frozen=True)
class AnnotationSpan:
    """One annotator's judgment over [start, end) ms; level 0 is implicit."""

    annotator_id: str
    start: int
    end: int
    level: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty span: start {self.start} >= end {self.end}")
        if not (1 <= self.level <= 5):
            raise ValueError(f"span level must be in [1, 5], got {self.level}")

    def overlaps(self, other: "AnnotationSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class AudioSignal:
    """Mono PCM audio, samples in [-1, 1]."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(self.samples) == 0:
            raise ValueError("audio signal must be nonempty")

    @property
    def duration_ms(self) -> int:
        return round(len(self.samples) * 1000 / self.sample_rate)


def _data_lines(stream: Iterable[str]) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, stripped line), skipping blanks and comments."""
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def _float_cell(cell: str, name: str, row: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"non-numeric {name} {cell!r}", row=row) from None


def _int_cell(cell: str, name: str, row: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ParseError(f"non-integer {name} {cell!r}", row=row) from None


def parse_keypoints(stream: Iterable[str]) -> list[KeypointFrame]:
    """Parse the keypoints CSV into frames, preserving row order.

    Empty coordinate cells mark missing joints. A joint is missing only if
    all three of its cells are empty; a partially empty triple is an error.
    """
    lines = _data_lines(stream)
    try:
        header_row, header = next(lines)
    except StopIteration:
        raise ParseError("missing header row") from None
    if header != KEYPOINT_HEADER:
        raise ParseError("unexpected keypoints header", row=header_row)

    frames: list[KeypointFrame] = []
    last_ts: int | None = None
    for row, line in lines:
        cells = line.split(",")
        if len(cells) != 1 + 3 * NUM_JOINTS:
            raise ParseError(
                f"expected {1 + 3 * NUM_JOINTS} columns, got {len(cells)}", row=row)
        ts = _int_cell(cells[0], "timestamp", row)
        if last_ts is not None and ts <= last_ts:
            raise ParseError(f"non-monotonic timestamp {ts} after {last_ts}", row=row)
        last_ts = ts
        joints = []
        for j in range(NUM_JOINTS):
            triple = cells[1 + 3 * j: 4 + 3 * j]
            empties = sum(1 for c in triple if c == "")
            if empties == 3:
                joints.append(None)
            elif empties == 0:
                joints.append(tuple(_float_cell(c, f"joint {j} coordinate", row)
                                    for c in triple))
            else:
                raise ParseError(f"joint {j} has a partially empty coordinate triple",
                                 row=row)
        frames.append(KeypointFrame(timestamp=ts, joints=tuple(joints)))
    return frames


def write_keypoints(frames: Sequence[KeypointFrame], comment: str | None = None) -> str:
    out = []
    if comment:
        out.append(f"# {comment}")
    out.append(KEYPOINT_HEADER)
    for frame in frames:
        cells = [str(frame.timestamp)]
        for joint in frame.joints:
            if joint is None:
                cells.extend(("", "", ""))
            else:
                cells.extend(repr(float(v)) for v in joint)
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def parse_physio(stream: Iterable[str]) -> list[PhysioSample]:
    """Parse the physiology CSV; timestamps must be strictly increasing."""
    lines = _data_lines(stream)
    try:
        header_row, header = next(lines)
    except StopIteration:
        raise ParseError("missing header row") from None
    if header != PHYSIO_HEADER:
        raise ParseError("unexpected physio header", row=header_row)

    samples: list[PhysioSample] = []
    last_ts: int | None = None
    for row, line in lines:
        cells = line.split(",")
        if len(cells) != 3:
            raise ParseError(f"expected 3 columns, got {len(cells)}", row=row)
        ts = _int_cell(cells[0], "timestamp", row)
        hr = _float_cell(cells[1], "heart_rate", row)
        br = _float_cell(cells[2], "breath_rate", row)
        if last_ts is not None and ts <= last_ts:
            raise ParseError(f"non-increasing timestamp {ts} after {last_ts}", row=row)
        if hr < 0:
            raise ParseError(f"negative heart rate {hr}", row=row)
        if br < 0:
            raise ParseError(f"negative breath rate {br}", row=row)
        last_ts = ts
        samples.append(PhysioSample(timestamp=ts, heart_rate=hr, breath_rate=br))
    return samples


def write_physio(samples: Sequence[PhysioSample], comment: str | None = None) -> str:
    out = []
    if comment:
        out.append(f"# {comment}")
    out.append(PHYSIO_HEADER)
    for s in samples:
        out.append(f"{s.timestamp},{repr(float(s.heart_rate))},{repr(float(s.breath_rate))}")
    return "\n".join(out) + "\n"


def parse_annotations(stream: Iterable[str]) -> list[AnnotationSpan]:
    """Parse annotation spans (JSONL); same-annotator overlaps are rejected."""
    spans: list[AnnotationSpan] = []
    for row, line in _data_lines(stream):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", row=row) from None
        if not isinstance(doc, dict):
            raise ParseError("line is not a JSON object", row=row)
        try:
            span = AnnotationSpan(
                annotator_id=str(doc["annotator_id"]),
                start=int(doc["start"]),
                end=int(doc["end"]),
                level=int(doc["level"]),
            )
        except KeyError as exc:
            raise ParseError(f"missing key {exc}", row=row) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=row) from None
        for prev in spans:
            if prev.annotator_id == span.annotator_id and prev.overlaps(span):
                raise ParseError(
                    f"span [{span.start}, {span.end}) overlaps an earlier span "
                    f"of annotator {span.annotator_id!r}", row=row)
        spans.append(span)
    return spans


def write_annotations(spans: Sequence[AnnotationSpan]) -> str:
    lines = [
        json.dumps({"annotator_id": s.annotator_id, "start": s.start,
                    "end": s.end, "level": s.level}, sort_keys=True)
        for s in spans
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# WAV handling is done by hand so that encoding and truncation problems are
# reported precisely instead of through opaque stdlib errors.

_WAVE_FORMAT_PCM = 1


def parse_audio(data: bytes) -> AudioSignal:
    """Decode a canonical 16-bit PCM WAV into a normalized mono signal."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ParseError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    raw = None
    declared_data_size = None
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8: pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise ParseError("truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            declared_data_size = size
            raw = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise ParseError("missing fmt chunk")
    if raw is None:
        raise ParseError("missing data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != _WAVE_FORMAT_PCM:
        raise ParseError(f"unsupported encoding: format tag {audio_format} is not PCM")
    if bits != 16:
        raise ParseError(f"unsupported sample width: {bits} bits (expected 16)")
    if channels not in (1, 2):
        raise ParseError(f"unsupported channel count {channels}")
    if len(raw) < declared_data_size:
        raise ParseError(
            f"truncated data chunk: header declares {declared_data_size} bytes, "
            f"{len(raw)} available")
    frame_bytes = 2 * channels
    if declared_data_size % frame_bytes != 0:
        raise ParseError("data chunk size is not a whole number of sample frames")
    ints = np.frombuffer(raw[:declared_data_size], dtype="<i2")
    samples = ints.astype(np.float64) / 32768.0
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioSignal(sample_rate=sample_rate, samples=samples)


def write_audio(signal: AudioSignal) -> bytes:
    """Encode a mono signal as canonical 16-bit PCM WAV.

    The 32768 scale mirrors the decoder exactly, so parse -> write -> parse
    is the identity on mono signals (values are k/32768 for int16 k).
    """
    ints = np.clip(np.rint(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    raw = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(raw), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_PCM, 1, signal.sample_rate,
        signal.sample_rate * 2, 2, 16,
        b"data", len(raw),
    )
    return header + raw


def load_audio(path: str | Path) -> AudioSignal:
    return parse_audio(Path(path).read_bytes())


def load_keypoints(path: str | Path) -> list[KeypointFrame]:
    with io.open(path, "r", encoding="utf-8") as f:
        return parse_keypoints(f)


def load_physio(path: str | Path) -> list[PhysioSample]:
    with io.open(path, "r", encoding="utf-8") as f:
        return parse_physio(f)


def load_annotations(path: str | Path) -> list[AnnotationSpan]:
    with io.open(path, "r", encoding="utf-8") as f:
        return parse_annotations(f)
