import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fearkit.align import (align_session, interpolate_keypoints, read_aligned_csv,
                           resample_physio, write_aligned_csv)
from fearkit.core import FrameClock, SessionManifest
from fearkit.errors import EmptyOverlapError, UnrecoverableJointError
from fearkit.ingest import AudioSignal, KeypointFrame, PhysioSample


def _frame(ts, value, missing=()):
    joints = tuple(None if j in missing else (value, value, value) for j in range(25))
    return KeypointFrame(timestamp=ts, joints=joints)


class TestInterpolate:
    def test_linear_midpoint(self):
        frames = [_frame(0, 0.0), _frame(1, 0.0, missing=(3,)), _frame(2, 2.0)]
        frames[0] = KeypointFrame(0, tuple((0.0, 0.0, 0.0) for _ in range(25)))
        frames[2] = KeypointFrame(2, tuple((2.0, 2.0, 2.0) for _ in range(25)))
        filled = interpolate_keypoints(frames)
        assert filled[1].joints[3] == (1.0, 1.0, 1.0)

    def test_constant_extension_at_start(self):
        frames = [_frame(0, 9.0, missing=(4,)), _frame(1, 5.0)]
        filled = interpolate_keypoints(frames)
        assert filled[0].joints[4] == (5.0, 5.0, 5.0)

    def test_unrecoverable_joint(self):
        frames = [_frame(0, 1.0, missing=(7,)), _frame(1, 1.0, missing=(7,))]
        with pytest.raises(UnrecoverableJointError) as err:
            interpolate_keypoints(frames)
        assert err.value.joint == 7

    def test_no_gaps_is_identity(self):
        frames = [_frame(0, 1.5), _frame(40, 2.5), _frame(80, -1.0)]
        assert interpolate_keypoints(frames) == frames

    @given(values=st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=8),
           gap=st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_interpolated_between_neighbors(self, values, gap):
        gap = min(gap, len(values) - 2)
        frames = []
        for i, v in enumerate(values):
            missing = (0,) if i == gap else ()
            joints = tuple(None if j in missing else (v, v, v) for j in range(25))
            frames.append(KeypointFrame(timestamp=i * 10, joints=joints))
        filled = interpolate_keypoints(frames)
        x = filled[gap].joints[0][0]
        lo = min(values[gap - 1], values[gap + 1])
        hi = max(values[gap - 1], values[gap + 1])
        assert lo - 1e-9 <= x <= hi + 1e-9


class TestResample:
    def test_midpoint(self):
        samples = [PhysioSample(0, 90.0, 15.0), PhysioSample(2000, 94.0, 17.0)]
        clock = FrameClock(1000, 1.0, 1)
        out = resample_physio(samples, clock)
        assert out[0, 0] == 92.0
        assert out[0, 1] == 16.0

    def test_constant_stream_exact(self):
        samples = [PhysioSample(t, 80.0, 12.0) for t in range(0, 10000, 2000)]
        clock = FrameClock(0, 30.0, 120)
        out = resample_physio(samples, clock)
        assert np.all(out[:, 0] == 80.0)
        assert np.all(out[:, 1] == 12.0)

    def test_before_first_sample(self):
        samples = [PhysioSample(5000, 70.0, 10.0), PhysioSample(7000, 90.0, 20.0)]
        clock = FrameClock(0, 30.0, 30)
        out = resample_physio(samples, clock)
        assert np.all(out[0] == (70.0, 10.0))

    def test_quarter_point_weighting(self):
        samples = [PhysioSample(0, 90.0, 15.0), PhysioSample(2000, 94.0, 17.0)]
        clock = FrameClock(500, 1000.0, 1)  # single frame at 500 ms
        out = resample_physio(samples, clock)
        assert out[0, 0] == pytest.approx(91.0)
        assert out[0, 1] == pytest.approx(15.5)


def _session_inputs(kp_end_ms=10000, physio_end_ms=12000, audio_s=10.0, fps=30.0):
    frame_period = 1000 / fps
    n_kp = int(kp_end_ms / frame_period) + 1
    keypoints = [_frame(round(i * frame_period), float(i)) for i in range(n_kp)]
    physio = [PhysioSample(t, 90.0, 15.0) for t in range(0, physio_end_ms + 1, 2000)]
    audio = AudioSignal(8000, np.zeros(int(8000 * audio_s)) + 0.25)
    manifest = SessionManifest(
        session_id="s", game_id=1,
        clock=FrameClock(0, fps, int(kp_end_ms * fps / 1000)),
        keypoints_path="k", audio_path="a", physio_path="p", annotations_path="n")
    return manifest, keypoints, physio, audio


class TestAlignSession:
    def test_overlap_trim_to_300_frames(self):
        manifest, kp, ph, audio = _session_inputs()
        aligned = align_session(manifest, kp, ph, audio)
        assert aligned.clock.frame_count == 300
        assert aligned.keypoints.shape == (300, 25, 3)
        assert aligned.physio.shape == (300, 2)

    def test_disjoint_streams_error(self):
        manifest, kp, ph, audio = _session_inputs()
        late = [PhysioSample(t, 90.0, 15.0) for t in range(20000, 30000, 2000)]
        with pytest.raises(EmptyOverlapError):
            align_session(manifest, kp, late, audio)

    def test_identical_spans_keep_frame_count(self):
        manifest, kp, ph, audio = _session_inputs(physio_end_ms=10000)
        aligned = align_session(manifest, kp, ph, audio)
        assert aligned.clock.frame_count == manifest.clock.frame_count
        assert aligned.clock.start_time_ms == 0

    def test_deterministic(self):
        manifest, kp, ph, audio = _session_inputs()
        a = align_session(manifest, kp, ph, audio)
        b = align_session(manifest, kp, ph, audio)
        assert np.array_equal(a.keypoints, b.keypoints)
        assert np.array_equal(a.physio, b.physio)
        assert np.array_equal(a.audio.samples, b.audio.samples)
        assert write_aligned_csv(a) == write_aligned_csv(b)

    def test_aligned_csv_round_trip(self):
        manifest, kp, ph, audio = _session_inputs(kp_end_ms=2000)
        aligned = align_session(manifest, kp, ph, audio)
        text = write_aligned_csv(aligned, comment="config_hash=abc")
        keypoints, physio = read_aligned_csv(text)
        assert np.array_equal(keypoints, aligned.keypoints)
        assert np.array_equal(physio, aligned.physio)
