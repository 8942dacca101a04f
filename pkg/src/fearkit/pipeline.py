"""End-to-end glue: raw session directories to dataset files and models.

The CLI is a thin wrapper around these functions so every stage is equally
usable from Python. All stages are deterministic for a fixed config.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .align import AlignedStreams, align_session, write_aligned_csv
from .audio_features import framewise_audio
from .config import PipelineConfig
from .core import SessionManifest
from .dataset import (NUM_SKELETON_FEATURES, SessionFeatures, SplitMode,
                      read_dataset_csv, read_roster_manifest, window_sessions,
                      write_dataset_csv, write_roster_manifest)
from .errors import DatasetError, FusionError
from .ingest import (AnnotationSpan, load_annotations, load_audio, load_keypoints,
                     load_physio)
from .label_fusion import fuse_frames, spans_to_frames
from .skeleton_features import PcaModel, apply_pca, fit_pca


@dataclass
class LoadedSession:
    manifest: SessionManifest
    aligned: AlignedStreams
    spans: list


def load_session(session_dir: str | Path) -> LoadedSession:
    """Parse and align one raw session directory (must hold manifest.json)."""
    session_dir = Path(session_dir)
    manifest = SessionManifest.load(session_dir / "manifest.json")
    keypoints = load_keypoints(session_dir / manifest.keypoints_path)
    physio = load_physio(session_dir / manifest.physio_path)
    audio = load_audio(session_dir / manifest.audio_path)
    spans = load_annotations(session_dir / manifest.annotations_path)
    aligned = align_session(manifest, keypoints, physio, audio)
    return LoadedSession(manifest=manifest, aligned=aligned, spans=spans)


def session_roster(sessions: Sequence[LoadedSession]) -> list[str]:
    ids = sorted({span.annotator_id for s in sessions for span in s.spans})
    if len(ids) < 2:
        raise FusionError(f"need at least 2 annotators across sessions, found {len(ids)}")
    return ids


def fused_frame_labels(session: LoadedSession, roster: Sequence[str]
                       ) -> tuple[np.ndarray, np.ndarray]:
    """(per-annotator level matrix, fused per-frame levels) on the aligned clock."""
    matrix = spans_to_frames(session.spans, session.aligned.clock, roster)
    return matrix, fuse_frames(matrix)


def _pca_fit_rows(flat_by_session: dict, config: PipelineConfig) -> np.ndarray:
    """Rows used to fit PCA, honoring the configured leakage mode.

    "all" uses every frame; "train" approximates the training split at the
    frame level with the same fractions, seed, and mode as the sample split.
    """
    ordered = [flat_by_session[sid] for sid in sorted(flat_by_session)]
    if config.pca_fit == "all":
        return np.concatenate(ordered, axis=0)
    spec = config.split
    rng = np.random.default_rng(spec.seed)
    if spec.mode is SplitMode.PER_SAMPLE:
        stacked = np.concatenate(ordered, axis=0)
        order = rng.permutation(len(stacked))
        take = max(2, int(len(stacked) * spec.train))
        return stacked[order[:take]]
    session_ids = sorted(flat_by_session)
    order = [session_ids[i] for i in rng.permutation(len(session_ids))]
    total = sum(len(v) for v in flat_by_session.values())
    boundary = int(total * spec.train)
    rows, placed = [], 0
    for sid in order:
        group = flat_by_session[sid]
        if placed + len(group) <= boundary or not rows:
            rows.append(group)
        placed += len(group)
    return np.concatenate(rows, axis=0)


@dataclass
class BuildResult:
    sessions: list
    roster: list
    pca: PcaModel
    config_hash: str


def build_dataset(session_dirs: Sequence[str | Path], out_dir: str | Path,
                  config: PipelineConfig | None = None) -> BuildResult:
    """Build dataset CSVs (plus aligned CSVs, PCA model, config, roster).

    Output files, all stamped with the config hash:
      {session_id}.csv          61 feature columns + label columns
      {session_id}.aligned.csv  intermediate per-frame keypoints + physio
      pca_model.json, pipeline_config.json, roster.json
    """
    config = config or PipelineConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()

    loaded = [load_session(d) for d in session_dirs]
    by_id = {}
    for session in loaded:
        if session.manifest.session_id in by_id:
            raise DatasetError(f"duplicate session_id {session.manifest.session_id!r}")
        by_id[session.manifest.session_id] = session
    roster = session_roster(loaded)

    flat_by_session = {
        sid: s.aligned.keypoints.reshape(s.aligned.clock.frame_count, 75)
        for sid, s in by_id.items()
    }
    n_skel = config.pca_components if config.pca_components is not None else None
    pca = fit_pca(_pca_fit_rows(flat_by_session, config),
                  variance_target=config.pca_variance_target,
                  n_components=n_skel)
    if pca.n_components != NUM_SKELETON_FEATURES:
        raise DatasetError(
            f"PCA produced {pca.n_components} skeleton dims; the dataset schema "
            f"needs {NUM_SKELETON_FEATURES} (set pca_components accordingly)")

    sessions_out = []
    for sid in sorted(by_id):
        session = by_id[sid]
        aligned = session.aligned
        skeleton = apply_pca(pca, flat_by_session[sid])
        audio = framewise_audio(aligned.audio, aligned.clock, config.audio,
                                audio_start_ms=aligned.clock.start_time_ms)
        ann_matrix, fused = fused_frame_labels(session, roster)
        features = np.concatenate([skeleton, audio, aligned.physio], axis=1)
        sf = SessionFeatures(
            session_id=sid,
            frame_index=np.arange(aligned.clock.frame_count, dtype=np.int64),
            features=features,
            annotator_labels=ann_matrix,
            fused_labels=fused,
            annotators=tuple(roster),
        )
        (out_dir / f"{sid}.csv").write_text(
            write_dataset_csv(sf, comment=f"config_hash={chash}"), encoding="utf-8")
        (out_dir / f"{sid}.aligned.csv").write_text(
            write_aligned_csv(aligned, comment=f"config_hash={chash}"), encoding="utf-8")
        sessions_out.append(sf)

    pca.save(out_dir / "pca_model.json")
    config.save(out_dir / "pipeline_config.json")
    write_roster_manifest(out_dir / "roster.json", sorted(by_id), roster, chash)
    return BuildResult(sessions=sessions_out, roster=roster, pca=pca, config_hash=chash)


def load_dataset(data_dir: str | Path) -> list[SessionFeatures]:
    data_dir = Path(data_dir)
    roster_doc = read_roster_manifest(data_dir / "roster.json")
    annotators = roster_doc["annotators"]
    sessions = []
    for sid in roster_doc["sessions"]:
        text = (data_dir / f"{sid}.csv").read_text(encoding="utf-8")
        sessions.append(read_dataset_csv(text, session_id=sid, annotators=annotators))
    return sessions


def windows_for_config(sessions: Sequence[SessionFeatures], config: PipelineConfig):
    return window_sessions(sessions, length=config.sequence_length, stride=config.stride)
