import json
from pathlib import Path

import pytest

from fearkit.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def read_rows(path):
    lines = Path(path).read_text().splitlines()
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    return data[0].split(","), [ln.split(",") for ln in data[1:]]


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("synth", "--out", a, "--seconds", 4, "--fps", 30, "--seed", 5) == 0
        assert run("synth", "--out", b, "--seconds", 4, "--fps", 30, "--seed", 5) == 0
        for name in ("manifest.json", "keypoints.csv", "physio.csv",
                     "audio.wav", "annotations.jsonl", "ground_truth.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_refuses_overwrite_without_force(self, tmp_path, capsys):
        out = tmp_path / "s"
        assert run("synth", "--out", out, "--seconds", 3, "--seed", 1) == 0
        assert run("synth", "--out", out, "--seconds", 3, "--seed", 1) == 2
        err = capsys.readouterr().err
        assert err.startswith("error module=cli")
        assert run("synth", "--out", out, "--seconds", 3, "--seed", 1,
                   "--force") == 0

    def test_zero_gap_interpolation_identity(self, tmp_path):
        out = tmp_path / "s"
        run("synth", "--out", out, "--seconds", 3, "--seed", 2,
            "--gap-fraction", 0)
        from fearkit.align import interpolate_keypoints
        from fearkit.ingest import load_keypoints
        frames = load_keypoints(out / "keypoints.csv")
        assert not any(f.missing for f in frames)
        assert interpolate_keypoints(frames) == frames


@pytest.fixture(scope="module")
def built(tmp_path_factory, synth_session_dir):
    out = tmp_path_factory.mktemp("built")
    assert run("build", "--session", synth_session_dir, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, synth_session_dir):
    data = tmp_path_factory.mktemp("data")
    model = tmp_path_factory.mktemp("model")
    report = tmp_path_factory.mktemp("report")
    assert run("build", "--session", synth_session_dir, "--out", data,
               "--force") == 0
    assert run("train", "--data", data, "--out", model,
               "--epochs", 2, "--hidden-size", 8, "--batch-size", 64,
               "--classes", 6) == 0
    return data, model, report


class TestBuild:
    def test_dataset_shape(self, built):
        header, rows = read_rows(built / "synth-7.csv")
        assert len(rows) == 300
        assert header[0] == "frame_index"
        # 61 feature columns plus 3 label columns
        assert len(header) == 1 + 61 + 3
        assert header[-3:] == ["label_a", "label_b", "label_fused"]

    def test_rerun_byte_identical(self, built, tmp_path, synth_session_dir):
        again = tmp_path / "again"
        assert run("build", "--session", synth_session_dir, "--out", again) == 0
        for name in ("synth-7.csv", "synth-7.aligned.csv", "pca_model.json",
                     "pipeline_config.json", "roster.json"):
            assert (built / name).read_bytes() == (again / name).read_bytes(), name

    def test_planted_labels_recovered(self, built, synth_session_dir):
        truth = json.loads((synth_session_dir / "ground_truth.json").read_text())
        _, rows = read_rows(built / "synth-7.csv")
        fused = [int(r[-1]) for r in rows]
        assert fused == truth["frame_levels"]

    def test_config_hash_stamped(self, built):
        first = (built / "synth-7.csv").read_text().splitlines()[0]
        assert first.startswith("# config_hash=")
        config = json.loads((built / "pipeline_config.json").read_text())
        assert first.split("=")[1] == config["config_hash"]


class TestFuseLabels:
    def test_recovers_ground_truth(self, tmp_path, synth_session_dir):
        out = tmp_path / "labels.csv"
        assert run("fuse-labels",
                   "--annotations", synth_session_dir / "annotations.jsonl",
                   "--manifest", synth_session_dir / "manifest.json",
                   "--out", out) == 0
        _, rows = read_rows(out)
        truth = json.loads((synth_session_dir / "ground_truth.json").read_text())
        assert [int(r[-1]) for r in rows] == truth["frame_levels"]

    def test_accepts_service_event_log(self, tmp_path, synth_session_dir):
        from fearkit.service import AnnotationService
        import shutil
        root = tmp_path / "root"
        shutil.copytree(synth_session_dir, root / "synth-7")
        AnnotationService(root)  # seeds the event log from annotations.jsonl
        out = tmp_path / "labels.csv"
        assert run("fuse-labels",
                   "--annotations", root / "synth-7" / "annotation_log.jsonl",
                   "--manifest", root / "synth-7" / "manifest.json",
                   "--out", out) == 0
        truth = json.loads((synth_session_dir / "ground_truth.json").read_text())
        _, rows = read_rows(out)
        assert [int(r[-1]) for r in rows] == truth["frame_levels"]


class TestStats:
    def test_outputs(self, tmp_path, synth_session_dir):
        out = tmp_path / "stats"
        assert run("stats", "--session", synth_session_dir, "--out", out) == 0
        doc = json.loads((out / "stats.json").read_text())
        assert doc["total"] == 300
        assert abs(sum(lv["ratio"] for lv in doc["levels"]) - 1.0) < 1e-12
        assert (out / "class_distribution.png").stat().st_size > 0
        text = (out / "stats.txt").read_text()
        assert text.startswith("# config_hash=")
        assert "level" in text


class TestTrainEvalPredict:
    def test_train_artifacts(self, pipeline):
        _, model, _ = pipeline
        history = (model / "history.csv").read_text().splitlines()
        assert history[1] == "epoch,loss,val_accuracy"
        assert len(history) == 4  # comment + header + 2 epochs
        assert (model / "training_curves.png").stat().st_size > 0
        doc = json.loads((model / "checkpoint.json").read_text())
        assert doc["schema_version"] == 1
        assert doc["normalization"] is not None

    def test_eval_artifacts(self, pipeline):
        data, model, report = pipeline
        assert run("eval", "--model", model / "checkpoint.json", "--data", data,
                   "--out", report, "--split", "test") == 0
        doc = json.loads((report / "report.json").read_text())
        assert 0.0 <= doc["accuracy"] <= 1.0
        assert doc["recall_weighted"] == doc["accuracy"]
        assert (report / "confusion_matrix.png").stat().st_size > 0

    def test_predict_output(self, pipeline, tmp_path):
        data, model, _ = pipeline
        out = tmp_path / "preds.csv"
        assert run("predict", "--model", model / "checkpoint.json",
                   "--data", data, "--out", out) == 0
        header, rows = read_rows(out)
        assert header[:3] == ["session_id", "start_frame", "predicted"]
        assert len(rows) == 285  # 300 frames, dense 16-windows
        for row in rows[:5]:
            probs = [float(v) for v in row[3:]]
            assert abs(sum(probs) - 1.0) < 1e-9

    def test_binary_training(self, tmp_path, pipeline):
        data, _, _ = pipeline
        model2 = tmp_path / "model2"
        assert run("train", "--data", data, "--out", model2,
                   "--epochs", 1, "--hidden-size", 8, "--classes", 2) == 0
        doc = json.loads((model2 / "checkpoint.json").read_text())
        assert doc["config"]["num_classes"] == 2


class TestErrors:
    def test_missing_input_single_line_error(self, tmp_path, capsys):
        code = run("build", "--session", tmp_path / "nope", "--out", tmp_path / "o")
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error module=")
