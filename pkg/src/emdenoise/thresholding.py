"""Threshold-based denoising over the mode decomposition.

Per-mode thresholds come from a robust noise estimate on the first
component: its energy is (median(|c1|)/0.6745)^2, later mode energies
follow the geometric model E_i = E1/0.719 * 2.01^(-i), and the
threshold is tau_i = C * sqrt(E_i * 2 ln n) with C defaulting to 0.7.
Hard keeps samples above tau, soft shrinks toward zero, and the custom
rule blends the two with a continuous ramp so no time-frequency jumps
appear at the threshold boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emd import ImfStack, SiftConfig, decompose
from .signals import Signal, denormalize, normalize

THRESHOLD_METHODS = ("hard", "soft", "custom")
DEFAULT_C_CONST = 0.7

# Geometric energy-decay model constants for modes after the first.
ENERGY_SCALE = 0.719
ENERGY_RATIO_BASE = 2.01
NOISE_MEDIAN_FACTOR = 0.6745


@dataclass(frozen=True)
class CustomParams:
    """Shape of the custom rule: alpha blends soft (0) toward hard (1);
    gamma_ratio places the kill region boundary at gamma_ratio * tau."""

    alpha: float = 0.5
    gamma_ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.gamma_ratio < 1.0:
            raise ValueError(f"gamma_ratio must lie in (0, 1), got {self.gamma_ratio}")


@dataclass(frozen=True)
class ThresholdPlan:
    """Per-mode thresholds and the energy model they came from."""

    taus: np.ndarray
    c_const: float
    energies: np.ndarray
    e1_sq: float


def estimate_e1(imf1: np.ndarray) -> float:
    """Robust noise energy of the first mode: (median(|c1|)/0.6745)^2."""
    imf1 = np.asarray(imf1, dtype=np.float64)
    if imf1.size == 0:
        raise ValueError("imf1 must be non-empty")
    return float((np.median(np.abs(imf1)) / NOISE_MEDIAN_FACTOR) ** 2)


def model_energies(e1_sq: float, n_imfs: int) -> np.ndarray:
    """Modeled mode energies: E_1 = e1_sq, E_i = e1_sq/0.719 * 2.01^(-i).

    Later energies are produced by repeated multiplication with
    1/2.01 so consecutive ratios follow the geometric law exactly.
    """
    if e1_sq < 0:
        raise ValueError(f"e1_sq must be >= 0, got {e1_sq}")
    if n_imfs < 0:
        raise ValueError("n_imfs must be >= 0")
    energies = np.empty(n_imfs)
    if n_imfs == 0:
        return energies
    energies[0] = e1_sq
    ratio = 1.0 / ENERGY_RATIO_BASE
    level = (e1_sq / ENERGY_SCALE) * ratio * ratio  # i = 2 term
    for i in range(1, n_imfs):
        energies[i] = level
        level = level * ratio
    return energies


def universal_thresholds(energies: np.ndarray, n: float, c_const: float = DEFAULT_C_CONST) -> np.ndarray:
    """tau_i = C * sqrt(E_i * 2 ln n) for a length-n signal."""
    if n < 2:
        raise ValueError(f"signal length must be >= 2, got {n}")
    energies = np.asarray(energies, dtype=np.float64)
    return c_const * np.sqrt(energies * (2.0 * np.log(n)))


def build_plan(stack: ImfStack, c_const: float = DEFAULT_C_CONST) -> ThresholdPlan:
    """Estimate thresholds for every mode of a decomposition."""
    if stack.n_imfs == 0:
        empty = np.array([])
        return ThresholdPlan(empty, c_const, empty, 0.0)
    e1_sq = estimate_e1(stack.imfs[0])
    energies = model_energies(e1_sq, stack.n_imfs)
    taus = universal_thresholds(energies, stack.source_length, c_const)
    return ThresholdPlan(taus, c_const, energies, e1_sq)


def threshold_hard(c: np.ndarray, tau: float) -> np.ndarray:
    """Keep samples with |c| > tau unchanged, zero the rest."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    c = np.asarray(c, dtype=np.float64)
    return np.where(np.abs(c) > tau, c, 0.0)


def threshold_soft(c: np.ndarray, tau: float) -> np.ndarray:
    """Shrink toward zero: c-tau above tau, c+tau below -tau, else 0."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    c = np.asarray(c, dtype=np.float64)
    return np.where(c >= tau, c - tau, np.where(c <= -tau, c + tau, 0.0))


def threshold_custom(c: np.ndarray, tau: float, params: CustomParams) -> np.ndarray:
    """Continuous blend between kill, ramp, and shrink regions.

    For |c| >= tau the sample moves toward zero by (1-alpha)*tau; for
    |c| <= gamma it is zeroed; in between, a linear ramp connects zero
    to the boundary value, so the rule is continuous everywhere.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    c = np.asarray(c, dtype=np.float64)
    gamma = params.gamma_ratio * tau
    keep = c - np.sign(c) * ((1.0 - params.alpha) * tau)
    span = tau - gamma
    denom = span if span > 0 else 1.0
    ramp = np.sign(c) * ((np.abs(c) - gamma) / denom * (tau - (1.0 - params.alpha) * tau))
    return np.where(np.abs(c) >= tau, keep, np.where(np.abs(c) <= gamma, 0.0, ramp))


def threshold_stack(
    stack: ImfStack,
    plan: ThresholdPlan,
    method: str = "custom",
    params: CustomParams | None = None,
) -> np.ndarray:
    """Apply a threshold rule mode by mode and rebuild the sequence.

    The result is sum of thresholded modes plus the untouched residue.
    """
    if method not in THRESHOLD_METHODS:
        raise ValueError(f"method must be one of {THRESHOLD_METHODS}, got {method!r}")
    out = stack.residue.copy()
    for imf, tau in zip(stack.imfs, plan.taus):
        if method == "hard":
            out += threshold_hard(imf, float(tau))
        elif method == "soft":
            out += threshold_soft(imf, float(tau))
        else:
            out += threshold_custom(imf, float(tau), params or CustomParams())
    return out


def denoise_emd_threshold(
    noisy: Signal,
    cfg: SiftConfig | None = None,
    method: str = "custom",
    params: CustomParams | None = None,
    c_const: float = DEFAULT_C_CONST,
) -> Signal:
    """Full threshold pipeline: rescale, decompose, threshold, rebuild.

    Thresholds are computed on the [-1, 1]-rescaled signal; the output
    is mapped back to the input's original scale.
    """
    cfg = cfg or SiftConfig()
    norm, affine = normalize(noisy)
    stack = decompose(norm, cfg)
    plan = build_plan(stack, c_const)
    rebuilt = threshold_stack(stack, plan, method, params)
    return denormalize(Signal(rebuilt, noisy.sample_rate), affine)


def denoise_emd_custom(
    noisy: Signal,
    cfg: SiftConfig | None = None,
    params: CustomParams | None = None,
    c_const: float = DEFAULT_C_CONST,
) -> Signal:
    """Threshold pipeline with the continuous custom rule."""
    return denoise_emd_threshold(noisy, cfg, "custom", params or CustomParams(), c_const)
