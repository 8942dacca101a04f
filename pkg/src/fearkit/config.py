"""Layered pipeline configuration with a provenance hash.

Resolution order: built-in defaults < JSON config file < command-line flags.
The resolved document's SHA-256 prefix is embedded in every artifact (CSV
comment line or JSON field) so outputs can always be traced to the exact
settings that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .audio_features import AudioFeatureConfig
from .dataset import SplitMode, SplitSpec
from .errors import CliError
from .net import NetConfig


@dataclass(frozen=True)
class PipelineConfig:
    fps: float = 30.0
    sample_rate: int = 16000
    audio: AudioFeatureConfig = field(default_factory=AudioFeatureConfig)
    pca_variance_target: float = 0.98
    pca_components: int | None = 33
    pca_fit: str = "train"  # "train" or "all"
    sequence_length: int = 16
    stride: int = 1
    split: SplitSpec = field(default_factory=SplitSpec)
    net: NetConfig = field(default_factory=NetConfig)
    seed: int = 0

    def __post_init__(self):
        if self.pca_fit not in ("train", "all"):
            raise CliError(f"pca_fit must be 'train' or 'all', got {self.pca_fit!r}")
        if self.sequence_length < 1 or self.stride < 1:
            raise CliError("sequence_length and stride must be positive")

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["split"]["mode"] = self.split.mode.value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        if "audio" in doc and isinstance(doc["audio"], dict):
            doc["audio"] = AudioFeatureConfig(**doc["audio"])
        if "split" in doc and isinstance(doc["split"], dict):
            split_doc = dict(doc["split"])
            if "mode" in split_doc:
                split_doc["mode"] = SplitMode(split_doc["mode"])
            doc["split"] = SplitSpec(**split_doc)
        if "net" in doc and isinstance(doc["net"], dict):
            doc["net"] = NetConfig(**doc["net"])
        return cls(**doc)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def save(self, path: str | Path) -> None:
        doc = self.to_dict()
        doc["config_hash"] = self.config_hash()
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _deep_update(base: dict, overlay: dict) -> dict:
    out = dict(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> PipelineConfig:
    """Resolve defaults, optional config file, and flag overrides in order."""
    doc = PipelineConfig().to_dict()
    if path is not None:
        try:
            file_doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {path}: {exc}") from exc
        file_doc.pop("config_hash", None)
        doc = _deep_update(doc, file_doc)
    if overrides:
        doc = _deep_update(doc, overrides)
    return PipelineConfig.from_dict(doc)
