"""Core signal type, WAV I/O, resampling, normalization and a synthetic
breath-cycle generator.

All signals are 1-D float64 sample arrays with an integer sample rate.
WAV files are RIFF/WAVE, PCM, 16-bit signed little-endian, mono only.
"""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np
from scipy.signal import firwin, kaiserord

PCM_SCALE = 32768  # int16 full scale; load divides by it, write multiplies


class WavFormatError(ValueError):
    """WAV file is not PCM 16-bit, or is otherwise unreadable."""


class WavChannelError(WavFormatError):
    """WAV file has an unsupported channel count (mono required)."""


class SampleRangeError(ValueError):
    """Sample values fall outside the representable [-1, 1] range."""


class DegenerateSignalError(ValueError):
    """Signal is constant where a non-constant signal is required."""


@dataclass(frozen=True)
class Signal:
    """A finite 1-D sample sequence at a fixed sample rate (Hz)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class AffineParams:
    """Min/max pair defining the [-1, 1] rescaling of a signal."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DegenerateSignalError(
                f"x_max must exceed x_min, got ({self.x_min}, {self.x_max})"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map raw values into the [-1, 1] domain defined by this range."""
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.x_min) / (self.x_max - self.x_min) - 1.0

    def invert(self, y: np.ndarray) -> np.ndarray:
        """Map [-1, 1]-domain values back to the raw domain."""
        return (np.asarray(y, dtype=np.float64) + 1.0) / 2.0 * (self.x_max - self.x_min) + self.x_min


@dataclass(frozen=True)
class BreathSpec:
    """Parameters of one synthetic breath cycle.

    The carrier is filtered noise, band-limited to [band_low, band_high]
    Hz: a narrow resonance at peak_hz (vesicular sounds concentrate
    their energy in a low, narrow band, so the dominant component is a
    slowly wandering quasi-tone) plus a faint broadband turbulent floor
    carrying floor_fraction of the energy.  A two-phase amplitude
    envelope puts an inhale lobe first, then a weaker exhale lobe.
    """

    cycle_seconds: float = 5.0
    inhale_fraction: float = 0.4
    band_low: float = 100.0
    band_high: float = 1800.0
    peak_hz: float = 150.0
    peak_width_hz: float = 4.0
    floor_fraction: float = 0.0015
    exhale_gain: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.cycle_seconds <= 0:
            raise ValueError("cycle_seconds must be positive")
        if not 0.0 < self.inhale_fraction < 1.0:
            raise ValueError("inhale_fraction must lie strictly inside (0, 1)")
        if not (20.0 <= self.band_low < self.band_high <= 2000.0):
            raise ValueError(
                "band must satisfy 20 <= band_low < band_high <= 2000 Hz, "
                f"got [{self.band_low}, {self.band_high}]"
            )
        if not self.band_low <= self.peak_hz <= self.band_high:
            raise ValueError(
                f"peak_hz {self.peak_hz} must lie inside the band "
                f"[{self.band_low}, {self.band_high}]"
            )
        if self.peak_width_hz <= 0:
            raise ValueError("peak_width_hz must be positive")
        if not 0.0 <= self.floor_fraction < 1.0:
            raise ValueError("floor_fraction must lie in [0, 1)")
        if not 0.0 < self.exhale_gain <= 1.0:
            raise ValueError("exhale_gain must lie in (0, 1]")


def load_wav(path: str | os.PathLike) -> Signal:
    """Read a PCM 16-bit mono WAV file.

    Samples are scaled to [-1, 1] by dividing by 32768.

    Raises:
        FileNotFoundError: missing file.
        WavChannelError: more than one channel.
        WavFormatError: not 16-bit PCM, or not a WAV file at all.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            if n_channels != 1:
                raise WavChannelError(
                    f"unsupported channel count {n_channels} in {path} (mono required)"
                )
            if wf.getsampwidth() != 2 or wf.getcomptype() != "NONE":
                raise WavFormatError(
                    f"unsupported encoding in {path} (16-bit PCM required)"
                )
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"cannot parse {path} as WAV: {exc}") from exc
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Signal(data, rate)


def wav_quantize(x: np.ndarray) -> np.ndarray:
    """Snap values to the 16-bit grid a WAV file stores (round, clamp).

    write_wav followed by load_wav is the identity on grid values, so
    this function is exactly the WAV round trip.
    """
    ints = np.clip(np.round(np.asarray(x, dtype=np.float64) * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1)
    return ints / PCM_SCALE


def write_wav(signal: Signal, path: str | os.PathLike) -> None:
    """Write a Signal as PCM 16-bit mono WAV.

    All samples must already be inside [-1, 1]; out-of-range input is an
    error rather than a silent clip.
    """
    samples = signal.samples
    if np.max(np.abs(samples)) > 1.0:
        worst = float(np.max(np.abs(samples)))
        raise SampleRangeError(f"samples must lie in [-1, 1], max |sample| = {worst}")
    ints = np.clip(np.round(samples * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(signal.sample_rate)
        wf.writeframes(ints.tobytes())


def resample_half(signal: Signal) -> Signal:
    """Halve the sample rate with an anti-alias FIR low-pass.

    A linear-phase Kaiser-window FIR (>= 60 dB stopband) with cutoff at
    0.45 of the input Nyquist is applied with its group delay
    compensated, then every second sample is kept.  Content below 0.4 of
    the output Nyquist passes within 1%; near-Nyquist content is
    suppressed before decimation.
    """
    if signal.sample_rate % 2 != 0:
        raise ValueError(f"sample_rate must be even, got {signal.sample_rate}")
    # Transition band 0.45..0.55 of the input Nyquist, 60 dB attenuation.
    numtaps, beta = kaiserord(60.0, 0.1)
    if numtaps % 2 == 0:
        numtaps += 1
    taps = firwin(numtaps, 0.45, window=("kaiser", beta))
    filtered = np.convolve(signal.samples, taps, mode="same")
    return Signal(filtered[::2], signal.sample_rate // 2)


def normalize(signal: Signal) -> tuple[Signal, AffineParams]:
    """Rescale a signal to span [-1, 1] exactly.

    Returns the rescaled signal and the (min, max) pair needed to invert
    the map.  A constant signal has no valid rescaling.
    """
    x_min = float(np.min(signal.samples))
    x_max = float(np.max(signal.samples))
    if x_max == x_min:
        raise DegenerateSignalError("cannot normalize a constant signal")
    params = AffineParams(x_min, x_max)
    return Signal(params.apply(signal.samples), signal.sample_rate), params


def denormalize(signal: Signal, params: AffineParams) -> Signal:
    """Invert normalize() using the stored min/max pair."""
    return Signal(params.invert(signal.samples), signal.sample_rate)


ENVELOPE_RAMP = 0.3  # fraction of each phase spent rising and falling


def _envelope_lobe(u: np.ndarray) -> np.ndarray:
    """Flat-topped lobe on [0, 1): raised-sine edges, unit plateau."""
    lobe = np.ones_like(u)
    rising = u < ENVELOPE_RAMP
    falling = u > 1.0 - ENVELOPE_RAMP
    lobe[rising] = np.sin(np.pi * u[rising] / (2.0 * ENVELOPE_RAMP)) ** 2
    lobe[falling] = np.sin(np.pi * (1.0 - u[falling]) / (2.0 * ENVELOPE_RAMP)) ** 2
    return lobe


def breath_envelope(spec: BreathSpec, n_samples: int) -> np.ndarray:
    """Two-phase amplitude envelope: inhale lobe then scaled exhale lobe.

    Each phase is a flat-topped raised-sine lobe over its fraction of
    the cycle (breath sounds hold their level through a phase rather
    than pulsing), evaluated at half-sample offsets so that unit exhale
    gain with a 0.5 inhale fraction gives an envelope symmetric about
    the midpoint.
    """
    t = (np.arange(n_samples) + 0.5) / n_samples
    f = spec.inhale_fraction
    env = np.empty(n_samples)
    inhale = t < f
    env[inhale] = _envelope_lobe(t[inhale] / f)
    env[~inhale] = spec.exhale_gain * _envelope_lobe((t[~inhale] - f) / (1.0 - f))
    return env


def synth_breath_cycle(spec: BreathSpec, sample_rate: int) -> Signal:
    """Generate one deterministic synthetic breath cycle.

    White noise is filtered to the band and shaped by the resonance at
    peak_hz; a flat in-band floor carrying floor_fraction of the
    carrier energy is mixed in; the breath envelope modulates the
    result.  Peak amplitude is normalized to 0.9.  Identical spec and
    sample rate always reproduce the same samples.
    """
    if sample_rate < 2 * spec.band_high:
        raise ValueError(
            f"sample_rate {sample_rate} too low for band_high {spec.band_high}"
        )
    n = int(round(spec.cycle_seconds * sample_rate))
    rng = np.random.default_rng(spec.seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    in_band = (freqs >= spec.band_low) & (freqs <= spec.band_high)

    def shaped_noise(weights_in_band: np.ndarray) -> np.ndarray:
        weights = np.zeros_like(freqs)
        weights[in_band] = weights_in_band
        component = np.fft.irfft(spectrum * weights, n=n)
        scale = np.std(component)
        return component / scale if scale > 0 else component

    detune = (freqs[in_band] - spec.peak_hz) / spec.peak_width_hz
    tone = shaped_noise(1.0 / (1.0 + detune**2))
    carrier = np.sqrt(1.0 - spec.floor_fraction) * tone
    if spec.floor_fraction > 0.0:
        floor = shaped_noise(np.ones(int(np.count_nonzero(in_band))))
        carrier = carrier + np.sqrt(spec.floor_fraction) * floor
    shaped = carrier * breath_envelope(spec, n)
    peak = np.max(np.abs(shaped))
    if peak == 0.0:
        raise ValueError("degenerate breath spec produced a silent cycle")
    return Signal(shaped * (0.9 / peak), sample_rate)
