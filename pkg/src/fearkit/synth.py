"""Synthetic session generator with a planted ground-truth sidecar.

Every output is a pure function of the seed: keypoints follow smooth
sinusoidal trajectories with optional planted gaps, the audio is a tone
mixture whose amplitude rises inside fear spans, heart and breath rates ramp
with the planted fear level, and two synthetic annotators mark the spans
with controllable agreement. The sidecar records the spans and the per-frame
labels fusion is expected to recover.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FrameClock, SessionManifest
from .errors import CliError
from .ingest import (AnnotationSpan, AudioSignal, KeypointFrame, PhysioSample,
                     write_annotations, write_audio, write_keypoints, write_physio)

GROUND_TRUTH_SCHEMA_VERSION = 1

# Rough standing pose, meters, (x right, y up, z toward camera).
_BASE_POSE = np.array([
    (0.00, 1.70, 0.05), (0.00, 1.55, 0.00), (-0.20, 1.52, 0.00), (-0.28, 1.28, 0.02),
    (-0.30, 1.05, 0.05), (0.20, 1.52, 0.00), (0.28, 1.28, 0.02), (0.30, 1.05, 0.05),
    (0.00, 1.00, 0.00), (-0.12, 1.00, 0.00), (-0.14, 0.55, 0.02), (-0.15, 0.10, 0.02),
    (0.12, 1.00, 0.00), (0.14, 0.55, 0.02), (0.15, 0.10, 0.02), (-0.04, 1.73, 0.08),
    (0.04, 1.73, 0.08), (-0.09, 1.70, 0.02), (0.09, 1.70, 0.02), (0.18, 0.02, 0.12),
    (0.22, 0.02, 0.10), (0.15, 0.01, -0.04), (-0.18, 0.02, 0.12), (-0.22, 0.02, 0.10),
    (-0.15, 0.01, -0.04),
])


@dataclass(frozen=True)
class PlantedSpan:
    start_frame: int
    end_frame: int  # exclusive
    level: int


def _plant_spans(rng: np.random.Generator, frame_count: int) -> list[PlantedSpan]:
    spans = []
    cursor = int(rng.integers(5, 15))
    target = max(1, frame_count // 100)
    for _ in range(target):
        length = int(rng.integers(max(8, frame_count // 10), max(9, frame_count // 5)))
        start = cursor + int(rng.integers(8, 25))
        end = start + length
        if end > frame_count - 2:
            break
        spans.append(PlantedSpan(start_frame=start, end_frame=end,
                                 level=int(rng.integers(1, 6))))
        cursor = end
    if not spans:
        # very short sessions still get one span in the middle
        start = max(1, frame_count // 4)
        end = max(start + 1, (3 * frame_count) // 4)
        spans.append(PlantedSpan(start_frame=start, end_frame=end,
                                 level=int(rng.integers(1, 6))))
    return spans


def _level_at_ms(spans_ms: list[tuple[int, int, int]], t: float) -> int:
    for start, end, level in spans_ms:
        if start <= t < end:
            return level
    return 0


def _fuse_pair(a: int, b: int) -> int:
    # two-annotator rule: agreement wins, otherwise round-half-up average
    # with averages strictly below 1 bumped to 1
    if a == b:
        return a
    s = a + b
    fused = (2 * s + 2) // 4
    if fused == 0 and s > 0:
        fused = 1
    return fused


def gen_synthetic_session(
    out_dir: str | Path,
    seed: int,
    duration_s: float,
    fps: float = 30.0,
    session_id: str | None = None,
    game_id: int = 1,
    gap_fraction: float = 0.05,
    sample_rate: int = 16000,
    agreement: float = 1.0,
) -> SessionManifest:
    """Write one complete synthetic session into ``out_dir``.

    Streams deliberately overshoot the clock span by one frame boundary so
    alignment keeps every declared frame. Returns the manifest it wrote.
    """
    if duration_s < 2:
        raise CliError(f"duration must be at least 2 s, got {duration_s}")
    if not (0.0 <= gap_fraction < 1.0):
        raise CliError("gap_fraction must be in [0, 1)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    session_id = session_id or f"synth-{seed}"
    rng = np.random.default_rng(seed)

    frame_count = int(duration_s * fps)
    clock = FrameClock(start_time_ms=0, frame_rate=fps, frame_count=frame_count)
    duration_ms = clock.boundary_ms(frame_count)

    spans = _plant_spans(rng, frame_count)
    spans_ms = [(clock.boundary_ms(s.start_frame), clock.boundary_ms(s.end_frame), s.level)
                for s in spans]

    # keypoints: one extra row at the closing boundary so the stream spans
    # the whole clock
    n_kp = frame_count + 1
    times = np.array([clock.boundary_ms(i) for i in range(n_kp)])
    t_sec = times / 1000.0
    amp = rng.uniform(0.01, 0.06, size=(25, 3))
    freq = rng.uniform(0.2, 1.4, size=(25, 3))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(25, 3))
    coords = (_BASE_POSE[None, :, :]
              + amp[None, :, :] * np.sin(2.0 * np.pi * freq[None, :, :] * t_sec[:, None, None]
                                         + phase[None, :, :]))
    missing = rng.random((n_kp, 25)) < gap_fraction
    for j in range(25):
        if missing[:, j].all():
            missing[0, j] = False
    kp_frames = []
    for i in range(n_kp):
        joints = tuple(None if missing[i, j] else tuple(coords[i, j])
                       for j in range(25))
        kp_frames.append(KeypointFrame(timestamp=int(times[i]), joints=joints))

    # physiology every 2000 ms, covering the closing boundary
    hr_phase = rng.uniform(0.0, 2.0 * np.pi)
    br_phase = rng.uniform(0.0, 2.0 * np.pi)
    physio = []
    ts = 0
    while ts <= duration_ms:
        level = _level_at_ms(spans_ms, ts)
        hr = 88.0 + 3.0 * level + 2.0 * np.sin(2.0 * np.pi * ts / 7000.0 + hr_phase)
        br = 15.0 + 0.8 * level + 0.7 * np.sin(2.0 * np.pi * ts / 9000.0 + br_phase)
        physio.append(PhysioSample(timestamp=ts, heart_rate=round(hr, 3),
                                   breath_rate=round(br, 3)))
        ts += 2000
    if physio[-1].timestamp < duration_ms:
        physio.append(PhysioSample(timestamp=duration_ms,
                                   heart_rate=physio[-1].heart_rate,
                                   breath_rate=physio[-1].breath_rate))

    # audio: three soft tones, louder inside fear spans
    n_samples = round(duration_ms * sample_rate / 1000)
    st = np.arange(n_samples) / sample_rate
    base = (0.05 * np.sin(2.0 * np.pi * 220.0 * st)
            + 0.04 * np.sin(2.0 * np.pi * 330.0 * st)
            + 0.03 * np.sin(2.0 * np.pi * 440.0 * st))
    gain = np.ones(n_samples)
    for start_ms, end_ms, level in spans_ms:
        i0 = round(start_ms * sample_rate / 1000)
        i1 = round(end_ms * sample_rate / 1000)
        gain[i0:i1] = 1.0 + 1.1 * level
    noise = 0.004 * rng.standard_normal(n_samples)
    audio = AudioSignal(sample_rate=sample_rate,
                        samples=np.clip(base * gain + noise, -1.0, 1.0))

    # two annotators; annotator b disagrees on a span's level with
    # probability (1 - agreement), shifted by one step
    ann_a = [AnnotationSpan("ann_a", s_ms, e_ms, level)
             for s_ms, e_ms, level in spans_ms]
    ann_b = []
    for s_ms, e_ms, level in spans_ms:
        b_level = level
        if rng.random() >= agreement:
            b_level = min(5, level + 1) if level < 5 else 4
        ann_b.append(AnnotationSpan("ann_b", s_ms, e_ms, b_level))

    frame_levels = []
    for i in range(frame_count):
        t = clock.boundary_ms(i)
        la = _level_at_ms([(s.start, s.end, s.level) for s in ann_a], t)
        lb = _level_at_ms([(s.start, s.end, s.level) for s in ann_b], t)
        frame_levels.append(_fuse_pair(la, lb))

    manifest = SessionManifest(
        session_id=session_id, game_id=game_id, clock=clock,
        keypoints_path="keypoints.csv", audio_path="audio.wav",
        physio_path="physio.csv", annotations_path="annotations.jsonl",
    )
    manifest.save(out_dir / "manifest.json")
    (out_dir / "keypoints.csv").write_text(write_keypoints(kp_frames), encoding="utf-8")
    (out_dir / "physio.csv").write_text(write_physio(physio), encoding="utf-8")
    (out_dir / "audio.wav").write_bytes(write_audio(audio))
    (out_dir / "annotations.jsonl").write_text(
        write_annotations(ann_a + ann_b), encoding="utf-8")
    ground_truth = {
        "schema_version": GROUND_TRUTH_SCHEMA_VERSION,
        "session_id": session_id,
        "seed": seed,
        "fps": fps,
        "frame_count": frame_count,
        "spans": [{"start_frame": s.start_frame, "end_frame": s.end_frame,
                   "start_ms": clock.boundary_ms(s.start_frame),
                   "end_ms": clock.boundary_ms(s.end_frame),
                   "level": s.level} for s in spans],
        "annotator_levels": {
            "ann_a": [[s.start, s.end, s.level] for s in ann_a],
            "ann_b": [[s.start, s.end, s.level] for s in ann_b],
        },
        "frame_levels": frame_levels,
    }
    (out_dir / "ground_truth.json").write_text(
        json.dumps(ground_truth, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
