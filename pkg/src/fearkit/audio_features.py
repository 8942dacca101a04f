"""Framewise 26-dimensional audio feature extraction.

Feature order (column names a0..a25 in the dataset):

    0  zcr                 fraction of adjacent sample pairs with opposite sign
    1  spectral_centroid   Hz
    2  spectral_bandwidth  Hz
    3  spectral_rolloff    Hz (85% cumulative magnitude by default)
    4  chroma_mean         mean of 12 max-normalized pitch-class energies
    5  rmse                root mean square of the raw window
    6.. mfcc 0-19          DCT-II of log mel-filterbank energies

ZCR and RMSE are computed on the raw analysis slice; the spectral features
apply a periodic Hann window before the transform. All-zero windows use the
silence convention: every spectral feature is 0 (never NaN).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .core import FrameClock
from .dsp import dct2_matrix, hann_window, is_power_of_two, mel_filterbank, rfft_radix2
from .errors import FeatureError
from .ingest import AudioSignal

FEATURE_NAMES = (
    "zcr", "spectral_centroid", "spectral_bandwidth", "spectral_rolloff",
    "chroma_mean", "rmse",
) + tuple(f"mfcc{i}" for i in range(20))

NUM_AUDIO_FEATURES = 26

_CHROMA_REF_HZ = 440.0


@dataclass(frozen=True)
class AudioFeatureConfig:
    """Extraction parameters; serialized next to outputs for reproducibility."""

    window: int = 2048
    hop: int = 512
    rolloff_fraction: float = 0.85
    n_mels: int = 40
    n_mfcc: int = 20
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.hop < 1 or self.window < self.hop:
            raise FeatureError(f"need window >= hop >= 1, got {self.window}, {self.hop}")
        if not is_power_of_two(self.window):
            raise FeatureError(f"window {self.window} must be a power of two")
        if not (0 < self.rolloff_fraction <= 1):
            raise FeatureError("rolloff_fraction must be in (0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AudioFeatureConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class AudioFeatureFrame:
    """Named view of one 26-value feature vector."""

    zcr: float
    spectral_centroid: float
    spectral_bandwidth: float
    spectral_rolloff: float
    chroma_mean: float
    rmse: float
    mfcc: tuple

    def as_vector(self) -> np.ndarray:
        return np.array((self.zcr, self.spectral_centroid, self.spectral_bandwidth,
                         self.spectral_rolloff, self.chroma_mean, self.rmse)
                        + self.mfcc)

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "AudioFeatureFrame":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (NUM_AUDIO_FEATURES,):
            raise FeatureError(f"expected {NUM_AUDIO_FEATURES} values, got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise FeatureError("audio feature vector contains non-finite values")
        return cls(zcr=float(vec[0]), spectral_centroid=float(vec[1]),
                   spectral_bandwidth=float(vec[2]), spectral_rolloff=float(vec[3]),
                   chroma_mean=float(vec[4]), rmse=float(vec[5]),
                   mfcc=tuple(float(v) for v in vec[6:]))


def analysis_frames(signal: AudioSignal, window: int, hop: int) -> tuple[np.ndarray, np.ndarray]:
    """Slice the signal into analysis frames starting at multiples of hop.

    Returns (starts, frames) where starts are sample offsets and frames has
    shape (ceil(len/hop), window); the trailing slice is zero-padded.
    """
    if hop < 1 or window < hop:
        raise FeatureError(f"need window >= hop >= 1, got {window}, {hop}")
    n = len(signal.samples)
    if n == 0:
        raise FeatureError("cannot frame an empty signal")
    count = max(1, -(-n // hop))
    starts = np.arange(count) * hop
    frames = np.zeros((count, window))
    for k, s in enumerate(starts):
        chunk = signal.samples[s: s + window]
        frames[k, : len(chunk)] = chunk
    return starts, frames


def _pitch_classes(freqs: np.ndarray) -> np.ndarray:
    classes = np.zeros(len(freqs), dtype=np.int64)
    positive = freqs > 0
    classes[positive] = np.mod(
        np.rint(12.0 * np.log2(freqs[positive] / _CHROMA_REF_HZ)).astype(np.int64), 12)
    return classes


def _feature_matrix(frames: np.ndarray, sample_rate: int,
                    cfg: AudioFeatureConfig) -> np.ndarray:
    """Vectorized 26-feature extraction over a (m, window) frame matrix."""
    m, n = frames.shape
    out = np.zeros((m, NUM_AUDIO_FEATURES))

    signs = np.sign(frames)
    out[:, 0] = (signs[:, :-1] * signs[:, 1:] == -1).sum(axis=1) / (n - 1)
    out[:, 5] = np.sqrt(np.mean(frames ** 2, axis=1))

    spectrum = rfft_radix2(frames * hann_window(n))
    mag = np.abs(spectrum)
    power = mag ** 2
    freqs = np.arange(n // 2 + 1) * sample_rate / n
    total = mag.sum(axis=1)
    live = total > 0.0

    if live.any():
        centroid = np.zeros(m)
        centroid[live] = (mag[live] @ freqs) / total[live]
        out[:, 1] = centroid
        spread = (freqs[None, :] - centroid[:, None]) ** 2
        out[live, 2] = np.sqrt((mag[live] * spread[live]).sum(axis=1) / total[live])
        cum = np.cumsum(mag, axis=1)
        threshold = cfg.rolloff_fraction * total
        roll_idx = np.argmax(cum >= threshold[:, None], axis=1)
        out[live, 3] = freqs[roll_idx[live]]

        classes = _pitch_classes(freqs)
        chroma = np.zeros((m, 12))
        for pc in range(12):
            chroma[:, pc] = power[:, classes == pc].sum(axis=1)
        peak = chroma.max(axis=1)
        peaked = peak > 0.0
        chroma[peaked] /= peak[peaked, None]
        out[:, 4] = np.where(peaked, chroma.mean(axis=1), 0.0)

    fb = mel_filterbank(cfg.n_mels, n, sample_rate)
    mel_energy = power @ fb.T
    log_mel = np.log(np.maximum(mel_energy, cfg.log_floor))
    out[:, 6:6 + cfg.n_mfcc] = log_mel @ dct2_matrix(cfg.n_mfcc, cfg.n_mels).T
    return out


def feature_vector(window_samples: np.ndarray, sample_rate: int,
                   cfg: AudioFeatureConfig | None = None) -> AudioFeatureFrame:
    """Extract the 26 features from one raw analysis slice."""
    cfg = cfg or AudioFeatureConfig()
    window_samples = np.asarray(window_samples, dtype=np.float64)
    if window_samples.ndim != 1:
        raise FeatureError("expected a 1-D sample window")
    if not is_power_of_two(len(window_samples)):
        raise FeatureError(f"window length {len(window_samples)} must be a power of two")
    vec = _feature_matrix(window_samples[None, :], sample_rate, cfg)[0]
    return AudioFeatureFrame.from_vector(vec)


def framewise_audio(signal: AudioSignal, clock: FrameClock,
                    cfg: AudioFeatureConfig | None = None,
                    audio_start_ms: int | None = None) -> np.ndarray:
    """Average analysis-frame features into per-video-frame vectors.

    An analysis frame belongs to the video frame whose half-open time
    interval contains its start time. Video frames without any analysis
    frame inherit the nearest preceding vector (the first following one for
    a leading gap). Output shape is (clock.frame_count, 26).
    """
    cfg = cfg or AudioFeatureConfig()
    if clock.frame_count == 0:
        return np.zeros((0, NUM_AUDIO_FEATURES))
    start_ms = clock.start_time_ms if audio_start_ms is None else audio_start_ms
    starts, frames = analysis_frames(signal, cfg.window, cfg.hop)
    feats = _feature_matrix(frames, signal.sample_rate, cfg)

    start_times = start_ms + starts * 1000.0 / signal.sample_rate
    boundaries = np.array([clock.boundary_ms(i) for i in range(clock.frame_count + 1)],
                          dtype=np.float64)
    slot = np.searchsorted(boundaries, start_times, side="right") - 1
    in_range = (slot >= 0) & (slot < clock.frame_count)

    sums = np.zeros((clock.frame_count, NUM_AUDIO_FEATURES))
    counts = np.zeros(clock.frame_count)
    np.add.at(sums, slot[in_range], feats[in_range])
    np.add.at(counts, slot[in_range], 1.0)

    out = np.zeros_like(sums)
    filled = counts > 0
    if not filled.any():
        raise FeatureError("no analysis frame falls inside the clock span")
    out[filled] = sums[filled] / counts[filled, None]
    last = np.maximum.accumulate(np.where(filled, np.arange(clock.frame_count), -1))
    first_filled = int(np.argmax(filled))
    last = np.where(last < 0, first_filled, last)
    return out[last]
