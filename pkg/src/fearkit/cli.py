"""Command-line entry point wiring the whole pipeline.

Commands: synth, build, fuse-labels, stats, train, eval, predict, serve.
Every artifact embeds the resolved config hash; reruns with identical inputs
and config produce byte-identical files, and nothing is overwritten without
``--force``. Failures exit nonzero with one machine-parsable line:
``error module=<module> message=<text>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import PipelineConfig, load_config
from .core import SessionManifest
from .dataset import (SequenceSample, SplitMode, annotator_column_names,
                      class_stats, fit_normalization, split)
from .errors import CliError, FearkitError
from .ingest import load_annotations
from .label_fusion import fuse_frames, spans_to_frames
from .metrics import evaluate
from .net import history_csv, load_checkpoint, predict_batch, save_checkpoint, train
from .pipeline import build_dataset, load_dataset, load_session, windows_for_config
from .service import replay_log_spans, serve_forever
from .synth import gen_synthetic_session


def _ensure_writable(paths: list[Path], force: bool) -> None:
    for path in paths:
        if path.exists() and not force:
            raise CliError(f"refusing to overwrite {path} (use --force)")


def _overrides_from_args(args) -> dict:
    overrides: dict = {}
    for attr, keys in (
        ("seed", ("seed",)),
        ("fps", ("fps",)),
        ("pca_fit", ("pca_fit",)),
        ("pca_components", ("pca_components",)),
        ("sequence_length", ("sequence_length",)),
        ("stride", ("stride",)),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[keys[0]] = value
    net_overrides = {}
    for attr, key in (("classes", "num_classes"), ("epochs", "epochs"),
                      ("lr", "learning_rate"), ("batch_size", "batch_size"),
                      ("hidden_size", "hidden_size"), ("net_seed", "seed"),
                      ("dropout", "dropout_rate")):
        value = getattr(args, attr, None)
        if value is not None:
            net_overrides[key] = value
    if getattr(args, "no_attention", False):
        net_overrides["use_attention"] = False
    if getattr(args, "no_bidirectional", False):
        net_overrides["bidirectional"] = False
    if net_overrides:
        overrides["net"] = net_overrides
    split_overrides = {}
    for attr, key in (("split_seed", "seed"), ("split_mode", "mode")):
        value = getattr(args, attr, None)
        if value is not None:
            split_overrides[key] = value
    if split_overrides:
        overrides["split"] = split_overrides
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("net", {}).setdefault("seed", args.seed)
        overrides.setdefault("split", {}).setdefault("seed", args.seed)
    return overrides


def _config_from_args(args) -> PipelineConfig:
    return load_config(getattr(args, "config", None), _overrides_from_args(args))


def cmd_synth(args) -> int:
    out = Path(args.out)
    _ensure_writable([out / name for name in
                      ("manifest.json", "keypoints.csv", "physio.csv", "audio.wav",
                       "annotations.jsonl", "ground_truth.json")], args.force)
    manifest = gen_synthetic_session(
        out_dir=out, seed=args.seed, duration_s=args.seconds, fps=args.fps,
        session_id=args.session_id, game_id=args.game_id,
        gap_fraction=args.gap_fraction, agreement=args.agreement,
    )
    print(f"wrote synthetic session {manifest.session_id!r} "
          f"({manifest.clock.frame_count} frames) to {out}")
    return 0


def cmd_build(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    session_ids = [SessionManifest.load(Path(d) / "manifest.json").session_id
                   for d in args.session]
    outputs = [out / f"{sid}.csv" for sid in session_ids]
    outputs += [out / f"{sid}.aligned.csv" for sid in session_ids]
    outputs += [out / "pca_model.json", out / "pipeline_config.json", out / "roster.json"]
    _ensure_writable(outputs, args.force)
    result = build_dataset(args.session, out, config)
    total = sum(s.frame_count for s in result.sessions)
    print(f"built {len(result.sessions)} session(s), {total} frames, "
          f"retained_ratio={result.pca.retained_ratio:.6f}, "
          f"config_hash={result.config_hash} -> {out}")
    return 0


def cmd_fuse_labels(args) -> int:
    manifest = SessionManifest.load(args.manifest)
    text = Path(args.annotations).read_text(encoding="utf-8")
    first = next((line for line in text.splitlines() if line.strip()), "")
    if first and "\"type\"" in first:
        spans = replay_log_spans(args.annotations)
    else:
        spans = load_annotations(args.annotations)
    annotators = sorted({s.annotator_id for s in spans})
    if len(annotators) < 2:
        raise CliError(f"need at least 2 annotators, found {len(annotators)}")
    matrix = spans_to_frames(spans, manifest.clock, annotators)
    fused = fuse_frames(matrix)
    columns = annotator_column_names(len(annotators))
    config = _config_from_args(args)
    lines = [f"# config_hash={config.config_hash()}",
             "frame_index," + ",".join(columns) + ",label_fused"]
    for i in range(manifest.clock.frame_count):
        cells = [str(i)] + [str(int(v)) for v in matrix[i]] + [str(int(fused[i]))]
        lines.append(",".join(cells))
    body = "\n".join(lines) + "\n"
    if args.out:
        _ensure_writable([Path(args.out)], args.force)
        Path(args.out).write_text(body, encoding="utf-8")
        print(f"wrote fused labels for {manifest.clock.frame_count} frames to {args.out}")
    else:
        sys.stdout.write(body)
    return 0


def cmd_stats(args) -> int:
    out = Path(args.out)
    targets = [out / "stats.json", out / "stats.txt", out / "class_distribution.png"]
    _ensure_writable(targets, args.force)
    session = load_session(args.session)
    annotators = sorted({s.annotator_id for s in session.spans})
    if len(annotators) < 2:
        raise CliError(f"need at least 2 annotators, found {len(annotators)}")
    matrix = spans_to_frames(session.spans, session.aligned.clock, annotators)
    fused = fuse_frames(matrix)
    stats = class_stats(fused, session.aligned.physio[:, 0],
                        session.aligned.physio[:, 1], session.aligned.keypoints)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args)
    doc = stats.to_dict()
    doc["config_hash"] = config.config_hash()
    targets[0].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    targets[1].write_text(f"# config_hash={config.config_hash()}\n"
                          + stats.to_text_table() + "\n", encoding="utf-8")
    plots.save_class_distribution(stats, targets[2])
    print(stats.to_text_table())
    return 0


def _prepare_splits(data_dir: str, config: PipelineConfig):
    sessions = load_dataset(data_dir)
    samples = windows_for_config(sessions, config)
    return split(samples, config.split)


def _binarize_samples(samples, num_classes: int):
    if num_classes == 6:
        return list(samples)
    return [SequenceSample(features=s.features, target=0 if s.target == 0 else 1,
                           session_id=s.session_id, start_frame=s.start_frame)
            for s in samples]


def cmd_train(args) -> int:
    # the built dataset's own config is the base layer; flags override it
    base = args.config or Path(args.data) / "pipeline_config.json"
    merged = load_config(base, _overrides_from_args(args))
    out = Path(args.out)
    targets = [out / "checkpoint.json", out / "history.csv", out / "training_curves.png"]
    _ensure_writable(targets, args.force)
    train_set, val_set, test_set = _prepare_splits(args.data, merged)
    net_config = merged.net
    train_set = _binarize_samples(train_set, net_config.num_classes)
    val_set = _binarize_samples(val_set, net_config.num_classes)
    norm = fit_normalization(train_set)

    def normalize(part):
        return [SequenceSample(features=norm.apply(s.features), target=s.target,
                               session_id=s.session_id, start_frame=s.start_frame)
                for s in part]

    result = train(normalize(train_set), normalize(val_set), net_config)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(targets[0], result.params, net_config, norm,
                    metadata={"config_hash": merged.config_hash(),
                              "best_epoch": result.best_epoch,
                              "best_val_accuracy": result.best_val_accuracy,
                              "data_dir": str(args.data)})
    targets[1].write_text(
        history_csv(result.history, comment=f"config_hash={merged.config_hash()}"),
        encoding="utf-8")
    plots.save_training_curves(result.history, targets[2])
    print(f"trained {net_config.epochs} epoch(s); best val accuracy "
          f"{result.best_val_accuracy:.4f} at epoch {result.best_epoch} -> {out}")
    return 0


def cmd_eval(args) -> int:
    params, net_config, norm, _ = load_checkpoint(args.model)
    merged = load_config(Path(args.data) / "pipeline_config.json")
    out = Path(args.out)
    targets = [out / "report.json", out / "report.txt", out / "confusion_matrix.png"]
    _ensure_writable(targets, args.force)
    parts = dict(zip(("train", "validation", "test"),
                     _prepare_splits(args.data, merged)))
    samples = _binarize_samples(parts[args.split], net_config.num_classes)
    x = np.stack([norm.apply(s.features) if norm else s.features for s in samples])
    y = np.array([s.target for s in samples])
    probs = predict_batch(x, params, net_config)
    report = evaluate(probs.argmax(axis=1), y, net_config.num_classes)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc["config_hash"] = merged.config_hash()
    doc["split"] = args.split
    targets[0].write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
    targets[1].write_text(f"# config_hash={merged.config_hash()}\n"
                          + report.to_text_table(), encoding="utf-8")
    plots.save_confusion_matrix(report.confusion, targets[2])
    print(f"split={args.split} n={len(samples)} accuracy={report.accuracy:.4f} "
          f"f1_weighted={report.f1_weighted:.4f}")
    print(report.to_text_table())
    return 0


def cmd_predict(args) -> int:
    params, net_config, norm, _ = load_checkpoint(args.model)
    merged = load_config(Path(args.data) / "pipeline_config.json")
    sessions = load_dataset(args.data)
    if args.session:
        sessions = [s for s in sessions if s.session_id == args.session]
        if not sessions:
            raise CliError(f"no session {args.session!r} in {args.data}")
    samples = windows_for_config(sessions, merged)
    x = np.stack([norm.apply(s.features) if norm else s.features for s in samples])
    probs = predict_batch(x, params, net_config)
    levels = probs.argmax(axis=1)
    header = ("session_id,start_frame,predicted,"
              + ",".join(f"p{c}" for c in range(net_config.num_classes)))
    lines = [f"# config_hash={merged.config_hash()}", header]
    for sample, level, row in zip(samples, levels, probs):
        cells = [sample.session_id, str(sample.start_frame), str(int(level))]
        cells += [repr(float(p)) for p in row]
        lines.append(",".join(cells))
    body = "\n".join(lines) + "\n"
    if args.out:
        _ensure_writable([Path(args.out)], args.force)
        Path(args.out).write_text(body, encoding="utf-8")
        print(f"wrote {len(samples)} predictions to {args.out}")
    else:
        sys.stdout.write(body)
    return 0


def cmd_serve(args) -> int:
    serve_forever(args.root, args.port, args.ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fearkit",
        description="Multi-modal fear dataset construction and classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic session")
    p.add_argument("--out", required=True)
    p.add_argument("--seconds", type=float, required=True)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--session-id", default=None)
    p.add_argument("--game-id", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--gap-fraction", type=float, default=0.05)
    p.add_argument("--agreement", type=float, default=1.0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("build", help="ingest + align + features + labels -> dataset CSVs")
    p.add_argument("--session", action="append", required=True,
                   help="raw session directory (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--pca-fit", dest="pca_fit", choices=("train", "all"), default=None)
    p.add_argument("--pca-components", dest="pca_components", type=int, default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("fuse-labels", help="per-frame fused labels from annotation spans")
    p.add_argument("--annotations", required=True,
                   help="span JSONL or a service annotation event log")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_fuse_labels)

    p = sub.add_parser("stats", help="per-level class statistics for one session")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("train", help="train the classifier on built dataset files")
    p.add_argument("--data", required=True, help="directory produced by build")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--classes", type=int, choices=(2, 6), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--hidden-size", dest="hidden_size", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--split-seed", dest="split_seed", type=int, default=None)
    p.add_argument("--split-mode", dest="split_mode",
                   choices=tuple(m.value for m in SplitMode), default=None)
    p.add_argument("--no-attention", action="store_true")
    p.add_argument("--no-bidirectional", action="store_true")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="windowed predictions for built sessions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--session", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--root", required=True, help="directory of session directories")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", dest="ui_dir", default=None)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FearkitError as exc:
        print(f"error module={exc.module} message={exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
