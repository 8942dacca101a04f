"""Small DSP kernel: radix-2 FFT, DCT-II, Hann window, mel filterbank.

The FFT is an iterative Cooley-Tukey radix-2 transform vectorized over a
batch of rows, which is why analysis windows must be a power of two long.
Everything here is deterministic and dependency-free beyond numpy.
"""

from __future__ import annotations

import numpy as np

from .errors import FeatureError


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def fft_radix2(rows: np.ndarray) -> np.ndarray:
    """Batched forward FFT of shape (m, n) real or complex rows; n power of two."""
    rows = np.atleast_2d(rows)
    m, n = rows.shape
    if not is_power_of_two(n):
        raise FeatureError(f"FFT length {n} is not a power of two")
    x = rows[:, _bit_reverse_permutation(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        x = x.reshape(m, n // size, size)
        even = x[:, :, :half]
        odd = x[:, :, half:] * tw
        x = np.concatenate([even + odd, even - odd], axis=2).reshape(m, n)
        size *= 2
    return x


def rfft_radix2(rows: np.ndarray) -> np.ndarray:
    """First n//2 + 1 FFT bins of real rows (the nonredundant half-spectrum)."""
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    return fft_radix2(rows)[:, : n // 2 + 1]


def dft_naive(x: np.ndarray) -> np.ndarray:
    """Direct O(n^2) DFT of one row; the independent reference transform."""
    n = len(x)
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return basis @ np.asarray(x, dtype=np.complex128)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def dct2_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Orthonormal DCT-II matrix mapping n_in inputs to the first n_out coefficients."""
    j = np.arange(n_in)
    k = np.arange(n_out)[:, None]
    mat = np.cos(np.pi * (2 * j + 1) * k / (2 * n_in))
    mat *= np.sqrt(2.0 / n_in)
    mat[0, :] = np.sqrt(1.0 / n_in)
    return mat


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters spanning 0 Hz to Nyquist, shape (n_mels, n_fft//2 + 1).

    Filter weights are evaluated at the FFT bin center frequencies, so no
    filter collapses to zero even at coarse resolutions.
    """
    n_bins = n_fft // 2 + 1
    bin_freqs = np.arange(n_bins) * sample_rate / n_fft
    mel_edges = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2), n_mels + 2)
    hz_edges = mel_to_hz(mel_edges)
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, center, hi = hz_edges[m], hz_edges[m + 1], hz_edges[m + 2]
        rising = (bin_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb
