"""Evaluation metrics and spectrogram computation."""

from __future__ import annotations

import math

import numpy as np

from .signals import Signal


def _samples(x) -> np.ndarray:
    if isinstance(x, Signal):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def snr_db(desired, candidate) -> float:
    """10*log10 of desired-signal energy over error energy, in dB.

    Identical inputs give +inf (a sentinel, not an error); a desired
    signal with zero energy has no defined SNR.
    """
    x = _samples(desired)
    y = _samples(candidate)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    signal_energy = float(np.sum(x**2))
    if signal_energy == 0.0:
        raise ValueError("desired signal has zero energy")
    error_energy = float(np.sum((y - x) ** 2))
    if error_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_energy / error_energy)


def fit_pct(desired, candidate) -> float:
    """Percent of content preserved: 100 at identity, <= 100 always.

    100 * (1 - sum((y-x)^2) / sum((x - mean(x))^2)); a constant desired
    signal has zero variance and no defined fit.
    """
    x = _samples(desired)
    y = _samples(candidate)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    variance_energy = float(np.sum((x - np.mean(x)) ** 2))
    if variance_energy == 0.0:
        raise ValueError("desired signal is constant")
    return 100.0 * (1.0 - float(np.sum((y - x) ** 2)) / variance_energy)


def spectrogram(signal: Signal, window_len: int = 256, hop: int = 128) -> np.ndarray:
    """Hann-windowed short-time Fourier magnitudes.

    Returns a ((n - window_len) // hop + 1, window_len // 2 + 1) grid of
    frame-by-frame spectral magnitudes.
    """
    x = signal.samples
    if window_len < 2 or window_len > x.size:
        raise ValueError(f"window_len must lie in [2, {x.size}], got {window_len}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    window = np.hanning(window_len)
    n_frames = (x.size - window_len) // hop + 1
    n_bins = window_len // 2 + 1
    grid = np.empty((n_frames, n_bins))
    for frame in range(n_frames):
        start = frame * hop
        grid[frame] = np.abs(np.fft.rfft(x[start : start + window_len] * window))
    return grid


def save_spectrogram_txt(grid: np.ndarray, path) -> None:
    """Write a spectrogram as a plain-text matrix, one frame per row."""
    np.savetxt(path, grid, fmt="%.18e")
