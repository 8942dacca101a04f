import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fearkit.dataset import (NUM_FEATURES, Normalization, SessionFeatures,
                             SplitMode, SplitSpec, class_stats, dataset_header,
                             fit_normalization, read_dataset_csv,
                             skeleton_acceleration, split, window,
                             window_sessions, write_dataset_csv)
from fearkit.errors import DatasetError


def make_session(n, session_id="s1", seed=0, labels=None):
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = rng.integers(0, 6, size=n)
    ann = np.stack([labels, labels], axis=1)
    return SessionFeatures(
        session_id=session_id,
        frame_index=np.arange(n),
        features=rng.standard_normal((n, NUM_FEATURES)),
        annotator_labels=ann,
        fused_labels=np.asarray(labels),
        annotators=("ann_a", "ann_b"),
    )


class TestWindow:
    def test_dense_window_count(self):
        samples = window(make_session(300), length=16)
        assert len(samples) == 285
        assert samples[0].features.shape == (16, 61)

    def test_exact_length_session(self):
        assert len(window(make_session(16), length=16)) == 1

    def test_too_short_session(self):
        with pytest.raises(DatasetError):
            window(make_session(15), length=16)

    def test_target_is_first_frame_label(self):
        session = make_session(40, labels=np.arange(40) % 6)
        samples = window(session, length=16)
        for sample in samples:
            assert sample.target == session.fused_labels[sample.start_frame]

    def test_stride(self):
        assert len(window(make_session(100), length=16, stride=4)) == 22

    def test_multi_session_order(self):
        a, b = make_session(20, "b-second"), make_session(20, "a-first")
        samples = window_sessions([a, b], length=16)
        assert samples[0].session_id == "a-first"
        assert len(samples) == 10


class TestSplit:
    def test_sizes_100(self):
        samples = window(make_session(115), length=16)  # 100 samples
        train, val, test = split(samples, SplitSpec(seed=1))
        assert (len(train), len(val), len(test)) == (80, 10, 10)

    def test_deterministic_membership(self):
        samples = window(make_session(80), length=16)
        spec = SplitSpec(seed=42)
        a = split(samples, spec)
        b = split(samples, spec)
        for part_a, part_b in zip(a, b):
            assert [id(s) for s in part_a] == [id(s) for s in part_b]

    def test_disjoint_and_complete(self):
        samples = window(make_session(90), length=16)
        train, val, test = split(samples, SplitSpec(seed=3))
        ids = [id(s) for s in train + val + test]
        assert len(ids) == len(samples)
        assert len(set(ids)) == len(samples)

    def test_too_few_samples(self):
        samples = window(make_session(20), length=16)  # 5 samples
        with pytest.raises(DatasetError):
            split(samples, SplitSpec())

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(DatasetError):
            SplitSpec(train=0.8, validation=0.3, test=0.1)

    def test_per_session_respects_boundaries(self):
        sessions = [make_session(40, f"s{i}", seed=i) for i in range(6)]
        samples = window_sessions(sessions, length=16)  # 25 windows each, 150 total
        spec = SplitSpec(seed=5, mode=SplitMode.PER_SESSION)
        train, val, test = split(samples, spec)
        session_of = lambda part: {s.session_id for s in part}  # noqa: E731
        assert session_of(train) & session_of(val) == set()
        assert session_of(train) & session_of(test) == set()
        assert session_of(val) & session_of(test) == set()
        # oracle: replay the documented greedy rule
        rng = np.random.default_rng(5)
        ids = sorted({s.session_id for s in samples})
        order = [ids[i] for i in rng.permutation(len(ids))]
        counts = {sid: 25 for sid in ids}
        b1, b2 = int(150 * 0.8), int(150 * 0.9)
        expect_train, expect_val, expect_test = [], [], []
        placed = 0
        for sid in order:
            if placed + counts[sid] <= b1 and not expect_val and not expect_test:
                expect_train.append(sid)
            elif placed + counts[sid] <= b2 and not expect_test:
                expect_val.append(sid)
            else:
                expect_test.append(sid)
            placed += counts[sid]
        assert session_of(train) == set(expect_train)
        assert session_of(val) == set(expect_val)
        assert session_of(test) == set(expect_test)

    @given(st.integers(26, 120), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_split_partition_property(self, n, seed):
        samples = window(make_session(n, seed=seed % 1000), length=16)
        train, val, test = split(samples, SplitSpec(seed=seed))
        assert len(train) + len(val) + len(test) == len(samples)


class TestClassStats:
    def test_planted_ratios_exact(self):
        counts = [50, 30, 10, 6, 3, 1]
        labels = np.repeat(np.arange(6), counts)
        n = len(labels)
        rng = np.random.default_rng(10)
        stats = class_stats(labels, rng.uniform(80, 110, n), rng.uniform(10, 25, n),
                            rng.standard_normal((n, 25, 3)))
        for lv, want in zip(stats.levels, counts):
            assert lv.count == want
            assert lv.ratio == want / n

    def test_ratios_sum_to_one(self):
        rng = np.random.default_rng(11)
        labels = rng.integers(0, 6, 500)
        stats = class_stats(labels, rng.uniform(80, 110, 500), rng.uniform(10, 25, 500),
                            rng.standard_normal((500, 25, 3)))
        assert abs(sum(lv.ratio for lv in stats.levels) - 1.0) < 1e-12

    def test_single_level_hundred_percent(self):
        labels = np.full(40, 3)
        rng = np.random.default_rng(12)
        stats = class_stats(labels, rng.uniform(80, 110, 40), rng.uniform(10, 25, 40),
                            rng.standard_normal((40, 25, 3)))
        assert stats.levels[3].ratio == 1.0
        assert all(lv.ratio == 0.0 for lv in stats.levels if lv.level != 3)

    def test_acceleration_second_difference(self):
        # constant velocity has zero acceleration; a kink does not
        t = np.arange(10, dtype=float)
        keypoints = np.zeros((10, 25, 3))
        keypoints[:, :, 0] = t[:, None]
        assert np.allclose(skeleton_acceleration(keypoints), 0.0)
        keypoints[5:, :, 0] += 3.0
        accel = skeleton_acceleration(keypoints)
        assert accel[5] > 0.0

    def test_table_output(self):
        labels = np.array([0, 0, 1])
        rng = np.random.default_rng(13)
        stats = class_stats(labels, rng.uniform(80, 110, 3), rng.uniform(10, 25, 3),
                            rng.standard_normal((3, 25, 3)))
        table = stats.to_text_table()
        assert "level" in table and "total frames: 3" in table


class TestCsv:
    def test_round_trip(self):
        session = make_session(30, seed=14)
        text = write_dataset_csv(session, comment="config_hash=deadbeef")
        assert text.startswith("# config_hash=deadbeef\n")
        loaded = read_dataset_csv(text, "s1", ["ann_a", "ann_b"])
        assert np.array_equal(loaded.features, session.features)
        assert np.array_equal(loaded.fused_labels, session.fused_labels)
        assert np.array_equal(loaded.annotator_labels, session.annotator_labels)

    def test_header_names(self):
        header = dataset_header(2)
        cols = header.split(",")
        assert cols[0] == "frame_index"
        assert cols[1] == "s0" and cols[33] == "s32"
        assert cols[34] == "a0" and cols[59] == "a25"
        assert cols[60:62] == ["hr", "br"]
        assert cols[62:] == ["label_a", "label_b", "label_fused"]
        assert len(cols) == 1 + 61 + 3


class TestNormalization:
    def test_zero_mean_unit_std_on_fit_data(self):
        samples = window(make_session(60, seed=15), length=16)
        norm = fit_normalization(samples)
        stacked = np.concatenate([norm.apply(s.features) for s in samples])
        assert np.allclose(stacked.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(stacked.std(axis=0), 1.0, atol=1e-6)

    def test_json_round_trip(self):
        norm = Normalization(mean=np.arange(61.0), std=np.ones(61))
        doc = norm.to_dict()
        loaded = Normalization.from_dict(doc)
        assert np.array_equal(loaded.mean, norm.mean)
