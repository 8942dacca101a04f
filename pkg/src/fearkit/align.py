"""Place every modality on the session frame clock.

Gap filling is linear interpolation in time with constant extension at the
edges; physiology is resampled per frame the same way; streams are trimmed
to their common overlap so every emitted frame carries all three modalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FrameClock, SessionManifest
from .errors import AlignmentError, EmptyOverlapError, UnrecoverableJointError
from .ingest import AudioSignal, KeypointFrame, PhysioSample

ALIGNED_HEADER = (
    "frame_index,"
    + ",".join(f"{axis}{j}" for j in range(25) for axis in ("x", "y", "z"))
    + ",heart_rate,breath_rate"
)


@dataclass(frozen=True)
class AlignedStreams:
    """All modalities resampled onto one clock.

    keypoints has shape (frame_count, 25, 3) with no missing joints,
    physio has shape (frame_count, 2) ordered (heart_rate, breath_rate),
    audio is trimmed so its first sample falls on the clock start.
    """

    clock: FrameClock
    keypoints: np.ndarray
    physio: np.ndarray
    audio: AudioSignal

    def __post_init__(self):
        n = self.clock.frame_count
        if self.keypoints.shape != (n, 25, 3):
            raise AlignmentError(f"keypoints shape {self.keypoints.shape} != ({n}, 25, 3)")
        if self.physio.shape != (n, 2):
            raise AlignmentError(f"physio shape {self.physio.shape} != ({n}, 2)")


def interpolate_keypoints(frames: Sequence[KeypointFrame]) -> list[KeypointFrame]:
    """Fill missing joints by linear interpolation over time.

    Interior gaps take the time-weighted value between the nearest observed
    neighbors; leading and trailing gaps copy the nearest observed value.

    Raises:
        UnrecoverableJointError: if some joint is missing in every frame.
    """
    if not frames:
        return []
    times = np.array([f.timestamp for f in frames], dtype=np.float64)
    n = len(frames)
    coords = np.full((n, 25, 3), np.nan)
    for i, frame in enumerate(frames):
        for j, joint in enumerate(frame.joints):
            if joint is not None:
                coords[i, j, :] = joint
    for j in range(25):
        observed = ~np.isnan(coords[:, j, 0])
        if not observed.any():
            raise UnrecoverableJointError(j)
        if observed.all():
            continue
        xp = times[observed]
        for axis in range(3):
            coords[:, j, axis] = np.interp(times, xp, coords[observed, j, axis])
    out = []
    for i, frame in enumerate(frames):
        joints = tuple(tuple(coords[i, j, :]) for j in range(25))
        out.append(KeypointFrame(timestamp=frame.timestamp, joints=joints))
    return out


def keypoints_to_array(frames: Sequence[KeypointFrame]) -> np.ndarray:
    """Stack complete frames into (n, 25, 3); missing joints are an error."""
    arr = np.empty((len(frames), 25, 3))
    for i, frame in enumerate(frames):
        for j, joint in enumerate(frame.joints):
            if joint is None:
                raise AlignmentError(
                    f"frame {i} (t={frame.timestamp}) still has joint {j} missing")
            arr[i, j, :] = joint
    return arr


def resample_physio(samples: Sequence[PhysioSample], clock: FrameClock) -> np.ndarray:
    """Per-frame (heart_rate, breath_rate) by linear interpolation.

    Frame times before the first or after the last sample take the nearest
    sample's value.
    """
    if not samples:
        raise AlignmentError("cannot resample an empty physiology stream")
    ts = np.array([s.timestamp for s in samples], dtype=np.float64)
    hr = np.array([s.heart_rate for s in samples])
    br = np.array([s.breath_rate for s in samples])
    frame_times = np.array([clock.boundary_ms(i) for i in range(clock.frame_count)],
                           dtype=np.float64)
    return np.column_stack([np.interp(frame_times, ts, hr),
                            np.interp(frame_times, ts, br)])


def _nearest_indices(observed_times: np.ndarray, query_times: np.ndarray) -> np.ndarray:
    """Index of the nearest observed time per query; ties pick the earlier one."""
    right = np.searchsorted(observed_times, query_times, side="left")
    right = np.clip(right, 0, len(observed_times) - 1)
    left = np.clip(right - 1, 0, len(observed_times) - 1)
    d_left = np.abs(query_times - observed_times[left])
    d_right = np.abs(observed_times[right] - query_times)
    return np.where(d_left <= d_right, left, right)


def align_session(
    manifest: SessionManifest,
    keypoints: Sequence[KeypointFrame],
    physio: Sequence[PhysioSample],
    audio: AudioSignal,
) -> AlignedStreams:
    """Trim all streams to their common overlap and resample per frame.

    The output clock starts at the overlap start and holds
    ``floor(overlap_duration * fps / 1000)`` frames, so the span is
    half-open: a frame falling exactly on the overlap end is excluded.
    """
    if not keypoints:
        raise AlignmentError("no keypoint frames")
    if not physio:
        raise AlignmentError("no physiology samples")

    audio_start = manifest.effective_audio_start_ms
    spans = {
        "keypoints": (keypoints[0].timestamp, keypoints[-1].timestamp),
        "physio": (physio[0].timestamp, physio[-1].timestamp),
        "audio": (audio_start, audio_start + audio.duration_ms),
        "clock": (manifest.clock.start_time_ms, manifest.clock.end_time_ms()),
    }
    t0 = max(s[0] for s in spans.values())
    t1 = min(s[1] for s in spans.values())
    if t1 <= t0:
        detail = ", ".join(f"{k}=[{a}, {b}]" for k, (a, b) in spans.items())
        raise EmptyOverlapError(f"streams share no common span: {detail}")

    fps = manifest.clock.frame_rate
    frame_count = int((t1 - t0) * fps // 1000)
    if frame_count == 0:
        raise EmptyOverlapError(f"overlap [{t0}, {t1}] is shorter than one frame")
    clock = FrameClock(start_time_ms=t0, frame_rate=fps, frame_count=frame_count)

    complete = interpolate_keypoints(keypoints)
    observed_times = np.array([f.timestamp for f in complete], dtype=np.float64)
    frame_times = np.array([clock.boundary_ms(i) for i in range(frame_count)],
                           dtype=np.float64)
    idx = _nearest_indices(observed_times, frame_times)
    kp_array = keypoints_to_array(complete)[idx]

    physio_per_frame = resample_physio(physio, clock)

    rate = audio.sample_rate
    i0 = round((t0 - audio_start) * rate / 1000)
    i1 = round((t1 - audio_start) * rate / 1000)
    i0 = max(0, min(i0, len(audio.samples)))
    i1 = max(i0 + 1, min(i1, len(audio.samples)))
    trimmed = AudioSignal(sample_rate=rate, samples=audio.samples[i0:i1])

    return AlignedStreams(clock=clock, keypoints=kp_array,
                          physio=physio_per_frame, audio=trimmed)


def write_aligned_csv(aligned: AlignedStreams, comment: str | None = None) -> str:
    """Intermediate artifact: one row per frame, 75 keypoint columns + physio."""
    out = []
    if comment:
        out.append(f"# {comment}")
    out.append(ALIGNED_HEADER)
    flat = aligned.keypoints.reshape(aligned.clock.frame_count, 75)
    for i in range(aligned.clock.frame_count):
        cells = [str(i)]
        cells.extend(repr(float(v)) for v in flat[i])
        cells.append(repr(float(aligned.physio[i, 0])))
        cells.append(repr(float(aligned.physio[i, 1])))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def read_aligned_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Read back (keypoints (n,25,3), physio (n,2)) from the aligned CSV."""
    rows = [line for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows or rows[0] != ALIGNED_HEADER:
        raise AlignmentError("unexpected aligned CSV header")
    data = np.array([[float(c) for c in line.split(",")] for line in rows[1:]])
    if data.ndim != 2 or data.shape[1] != 78:
        raise AlignmentError("aligned CSV has the wrong column count")
    return data[:, 1:76].reshape(-1, 25, 3), data[:, 76:78]
