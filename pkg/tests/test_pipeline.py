import json

import numpy as np
import pytest

from fearkit.config import PipelineConfig, load_config
from fearkit.dataset import SplitMode
from fearkit.errors import CliError, DatasetError
from fearkit.pipeline import build_dataset, load_dataset, load_session, windows_for_config
from fearkit.synth import gen_synthetic_session


@pytest.fixture(scope="module")
def two_sessions(tmp_path_factory):
    root = tmp_path_factory.mktemp("multi")
    gen_synthetic_session(root / "s-a", seed=11, duration_s=6.0, fps=30.0,
                          session_id="s-a")
    gen_synthetic_session(root / "s-b", seed=12, duration_s=8.0, fps=30.0,
                          session_id="s-b", game_id=2)
    return root


class TestMultiSessionBuild:
    def test_builds_both_sessions(self, two_sessions, tmp_path):
        result = build_dataset([two_sessions / "s-a", two_sessions / "s-b"],
                               tmp_path, PipelineConfig())
        assert [s.session_id for s in result.sessions] == ["s-a", "s-b"]
        assert result.sessions[0].frame_count == 180
        assert result.sessions[1].frame_count == 240
        assert result.roster == ["ann_a", "ann_b"]
        loaded = load_dataset(tmp_path)
        assert [s.session_id for s in loaded] == ["s-a", "s-b"]
        assert np.allclose(loaded[0].features, result.sessions[0].features)

    def test_pca_fit_modes_share_schema_but_differ(self, two_sessions, tmp_path):
        dirs = [two_sessions / "s-a", two_sessions / "s-b"]
        r_train = build_dataset(dirs, tmp_path / "t", PipelineConfig(pca_fit="train"))
        r_all = build_dataset(dirs, tmp_path / "a", PipelineConfig(pca_fit="all"))
        assert r_train.pca.n_components == 33
        assert r_all.pca.n_components == 33
        assert not np.array_equal(r_train.pca.mean, r_all.pca.mean)

    def test_per_session_pca_fit(self, two_sessions, tmp_path):
        config = PipelineConfig.from_dict({
            **PipelineConfig().to_dict(),
            "split": {"train": 0.8, "validation": 0.1, "test": 0.1,
                      "seed": 3, "mode": "per_session"},
        })
        result = build_dataset([two_sessions / "s-a", two_sessions / "s-b"],
                               tmp_path, config)
        assert result.pca.n_components == 33

    def test_duplicate_session_id_rejected(self, two_sessions, tmp_path):
        with pytest.raises(DatasetError):
            build_dataset([two_sessions / "s-a", two_sessions / "s-a"], tmp_path)

    def test_windows_never_cross_sessions(self, two_sessions, tmp_path):
        result = build_dataset([two_sessions / "s-a", two_sessions / "s-b"],
                               tmp_path / "w", PipelineConfig())
        samples = windows_for_config(result.sessions, PipelineConfig())
        assert len(samples) == (180 - 15) + (240 - 15)
        for sample in samples:
            n = 180 if sample.session_id == "s-a" else 240
            assert sample.start_frame + 16 <= n


class TestLoadSession:
    def test_aligned_session_matches_manifest(self, two_sessions):
        session = load_session(two_sessions / "s-a")
        assert session.aligned.clock.frame_count == session.manifest.clock.frame_count
        assert session.aligned.keypoints.shape == (180, 25, 3)
        assert len(session.spans) >= 2


class TestConfigLayering:
    def test_defaults_file_flags_order(self, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({
            "fps": 25.0,
            "audio": {"hop": 256},
            "net": {"hidden_size": 16},
        }))
        resolved = load_config(config_file, overrides={"fps": 50.0})
        assert resolved.fps == 50.0            # flag beats file
        assert resolved.audio.hop == 256       # file beats default
        assert resolved.audio.window == 2048   # untouched default
        assert resolved.net.hidden_size == 16

    def test_hash_changes_with_config(self):
        assert PipelineConfig().config_hash() != \
            PipelineConfig(fps=25.0).config_hash()
        assert PipelineConfig().config_hash() == PipelineConfig().config_hash()

    def test_saved_config_reloads_identically(self, tmp_path):
        config = PipelineConfig(fps=24.0, pca_fit="all")
        path = tmp_path / "c.json"
        config.save(path)
        assert load_config(path) == config

    def test_invalid_pca_fit_rejected(self):
        with pytest.raises(CliError):
            PipelineConfig(pca_fit="sometimes")


class TestLearnability:
    def test_binary_task_beats_majority_baseline(self, tmp_path):
        """The planted audio/physio signal must be recoverable end to end:
        a short binary training run has to beat always-predict-majority."""
        from fearkit.dataset import SequenceSample, fit_normalization, split
        from fearkit.metrics import evaluate
        from fearkit.net import NetConfig, predict_batch, train

        gen_synthetic_session(tmp_path / "s", seed=3, duration_s=20.0, fps=30.0,
                              session_id="s")
        config = PipelineConfig()
        result = build_dataset([tmp_path / "s"], tmp_path / "d", config)
        samples = windows_for_config(result.sessions, config)
        binary = [SequenceSample(features=s.features,
                                 target=0 if s.target == 0 else 1,
                                 session_id=s.session_id,
                                 start_frame=s.start_frame) for s in samples]
        train_set, val_set, test_set = split(binary, config.split)
        norm = fit_normalization(train_set)

        def normalized(part):
            return [SequenceSample(features=norm.apply(s.features), target=s.target,
                                   session_id=s.session_id,
                                   start_frame=s.start_frame) for s in part]

        net_config = NetConfig(num_classes=2, hidden_size=16, epochs=10,
                               learning_rate=3e-3, batch_size=64,
                               dropout_rate=0.1, seed=0)
        outcome = train(normalized(train_set), normalized(val_set), net_config)

        x = np.stack([s.features for s in normalized(test_set)])
        y = np.array([s.target for s in test_set])
        probs = predict_batch(x, outcome.params, net_config)
        report = evaluate(probs.argmax(axis=1), y, 2)

        majority = max(np.mean(y == 0), np.mean(y == 1))
        assert report.accuracy > majority + 0.05, \
            f"accuracy {report.accuracy:.3f} vs majority {majority:.3f}"


class TestServiceConcurrency:
    def test_parallel_posts_all_persist(self, tmp_path):
        import threading
        from fearkit.service import AnnotationLog, AnnotationService

        root = tmp_path / "root"
        gen_synthetic_session(root / "s-c", seed=13, duration_s=4.0, fps=30.0,
                              session_id="s-c")
        service = AnnotationService(root)

        errors = []

        def post(idx):
            try:
                service.post_annotation("s-c", f"ann_{idx}", 100 * idx,
                                        100 * idx + 80, 1 + idx % 5)
            except Exception as exc:  # noqa: BLE001
                errors.append(exc)

        threads = [threading.Thread(target=post, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        log = AnnotationLog(root / "s-c" / "annotation_log.jsonl", "s-c")
        posted = [r for r in log.all_records() if r.created_at != "imported"]
        assert len(posted) == 16
        assert len({r.record_id for r in log.all_records()}) == len(log.all_records())
