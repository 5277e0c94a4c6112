"""White and 1/f^alpha noise generators plus exact-SNR mixing.

Generators are pure functions of (length, parameters, seed): replaying a
seed reproduces the sequence bit for bit.  Gaussian variates come from
numpy's PCG64 generator via Generator.standard_normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import Signal

NOISE_KINDS = ("white", "pink")


@dataclass(frozen=True)
class NoiseSpec:
    """A contamination recipe: kind, spectral exponent, target SNR, seed."""

    kind: str
    target_snr_db: float
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.kind == "white" and self.alpha != 0.0:
            raise ValueError("white noise requires alpha = 0")
        if self.kind == "pink" and not 0.0 < self.alpha < 2.0:
            raise ValueError(f"pink noise requires 0 < alpha < 2, got {self.alpha}")


def gen_white(length: int, seed: int) -> np.ndarray:
    """I.i.d. zero-mean unit-variance Gaussian samples (flat PSD)."""
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    return np.random.default_rng(seed).standard_normal(length)


def gen_pink(length: int, alpha: float, seed: int) -> np.ndarray:
    """Zero-mean unit-variance noise with PSD proportional to 1/f^alpha.

    A white Gaussian spectrum is shaped bin-by-bin with f^(-alpha/2)
    (DC zeroed), inverse-transformed, and standardized to unit variance,
    so the spectral law holds exactly in expectation.
    """
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (0, 2), got {alpha}")
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(length))
    freqs = np.fft.rfftfreq(length)
    spectrum[0] = 0.0
    spectrum[1:] *= freqs[1:] ** (-alpha / 2.0)
    out = np.fft.irfft(spectrum, n=length)
    return out / np.std(out)


def gen_noise(spec: NoiseSpec, length: int) -> np.ndarray:
    """Generate the noise sequence a NoiseSpec describes."""
    if spec.kind == "white":
        return gen_white(length, spec.seed)
    return gen_pink(length, spec.alpha, spec.seed)


def mix_at_snr(
    clean: Signal, noise: np.ndarray, target_snr_db: float
) -> tuple[Signal, np.ndarray]:
    """Add scaled noise so the mixture hits the target SNR exactly.

    The noise is scaled by k with 10*log10(sum(clean^2)/sum((k*noise)^2))
    equal to target_snr_db.  Returns the mixture and the scaled noise.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != clean.samples.shape:
        raise ValueError(
            f"length mismatch: clean {clean.samples.shape}, noise {noise.shape}"
        )
    clean_energy = float(np.sum(clean.samples**2))
    noise_energy = float(np.sum(noise**2))
    if clean_energy == 0.0:
        raise ValueError("clean signal has zero energy")
    if noise_energy == 0.0:
        raise ValueError("noise sequence has zero energy")
    k = np.sqrt(clean_energy / (noise_energy * 10.0 ** (target_snr_db / 10.0)))
    scaled = k * noise
    return Signal(clean.samples + scaled, clean.sample_rate), scaled
