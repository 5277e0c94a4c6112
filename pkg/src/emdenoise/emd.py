"""Empirical mode decomposition: sifting, envelope fitting, and the
fixed 13-channel representation.

The decomposition peels oscillatory components off a signal one at a
time.  Each component comes from repeatedly subtracting the mean of the
upper and lower cubic-spline envelopes until the iteration stabilizes
(Cauchy-style criterion on consecutive iterates) and the component
satisfies the mode condition that its extrema and zero-crossing counts
differ by at most one.  Sifting stops once the running remainder is
monotonic or constant.  The sum of all components plus the final
remainder reconstructs the input to float precision: the process is pure
bookkeeping, never an approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .signals import AffineParams, Signal

N_FIXED_CHANNELS = 13


class SiftError(Exception):
    """Base class for decomposition failures."""


class NoImfError(SiftError):
    """Input is monotonic or constant: no oscillatory component exists."""


class InsufficientExtremaError(SiftError):
    """Too few interior extrema to build both envelopes."""


@dataclass(frozen=True)
class SiftConfig:
    """Stopping knobs for the sifting iteration.

    sd_threshold is the Cauchy-style bound on
    sum((h_prev - h)^2) / sum(h_prev^2) between consecutive sift
    iterates; max_sift_iters caps one component's refinement and
    max_imfs caps the whole decomposition.
    """

    sd_threshold: float = 0.2
    max_sift_iters: int = 100
    max_imfs: int = 15

    def __post_init__(self):
        if self.sd_threshold <= 0:
            raise ValueError("sd_threshold must be positive")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")


@dataclass(frozen=True)
class ImfStack:
    """Ordered intrinsic mode functions plus the final residue."""

    imfs: tuple[np.ndarray, ...]
    residue: np.ndarray
    source_length: int

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        """Sum of all components and the residue (equals the source)."""
        total = self.residue.copy()
        for imf in self.imfs:
            total += imf
        return total

    def imf_means(self) -> list[float]:
        """Mean of each component, reported as a symmetry diagnostic."""
        return [float(np.mean(imf)) for imf in self.imfs]


@dataclass(frozen=True)
class Imf13:
    """Exactly 13 channels that sum to the decomposed signal.

    Channels 1..12 are the first twelve components (zero-filled when
    absent); channel 13 absorbs every later component plus the residue,
    so the channel sum still reconstructs the signal exactly.
    """

    channels: np.ndarray  # shape (13, n)
    affine: AffineParams

    def __post_init__(self):
        if self.channels.shape[0] != N_FIXED_CHANNELS:
            raise ValueError(f"expected {N_FIXED_CHANNELS} channels, got {self.channels.shape[0]}")

    def rows(self) -> np.ndarray:
        """Per-sample feature rows, shape (n, 13)."""
        return self.channels.T


def find_extrema(x: np.ndarray) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Locate strict interior maxima and minima.

    A plateau contributes its midpoint index once; endpoints never
    count.  Returns ((max_idx, max_val), (min_idx, min_val)).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise ValueError(f"need at least 3 samples, got {x.size}")
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        empty = np.array([], dtype=np.intp), np.array([])
        return empty, (np.array([], dtype=np.intp), np.array([]))
    s = np.sign(d[nz])
    turn = s[:-1] != s[1:]
    # A run of equal samples between opposite slopes is one extremum at its middle.
    starts = nz[:-1][turn] + 1
    ends = nz[1:][turn]
    mids = (starts + ends) // 2
    is_max = s[:-1][turn] > 0
    max_idx = mids[is_max]
    min_idx = mids[~is_max]
    return (max_idx, x[max_idx]), (min_idx, x[min_idx])


def _mirrored_knots(idx: np.ndarray, val: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Reflect the two extrema nearest each end about the endpoints."""
    left_t = np.array([-idx[1], -idx[0]], dtype=np.float64)
    left_v = np.array([val[1], val[0]])
    right_t = np.array([2 * (n - 1) - idx[-1], 2 * (n - 1) - idx[-2]], dtype=np.float64)
    right_v = np.array([val[-1], val[-2]])
    return (
        np.concatenate([left_t, idx.astype(np.float64), right_t]),
        np.concatenate([left_v, val, right_v]),
    )


def envelopes(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Natural cubic-spline upper and lower envelopes of a sequence.

    Extrema are mirrored about both endpoints before fitting, which
    keeps the spline from swinging wildly at the edges.  Raises
    InsufficientExtremaError when fewer than two maxima or two minima
    exist, which callers treat as "the remainder is monotonic".
    """
    (max_idx, max_val), (min_idx, min_val) = find_extrema(x)
    if max_idx.size < 2 or min_idx.size < 2:
        raise InsufficientExtremaError(
            f"need >= 2 maxima and >= 2 minima, found {max_idx.size} and {min_idx.size}"
        )
    n = x.size
    t = np.arange(n, dtype=np.float64)
    up_t, up_v = _mirrored_knots(max_idx, max_val, n)
    lo_t, lo_v = _mirrored_knots(min_idx, min_val, n)
    upper = CubicSpline(up_t, up_v, bc_type="natural")(t)
    lower = CubicSpline(lo_t, lo_v, bc_type="natural")(t)
    return upper, lower


def zero_crossings(x: np.ndarray) -> int:
    """Count sign changes, treating exact zeros as transparent."""
    s = np.sign(x)
    s = s[s != 0]
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s[:-1] != s[1:]))


def count_extrema(x: np.ndarray) -> int:
    """Number of strict interior extrema (maxima plus minima)."""
    if x.size < 3:
        return 0
    (max_idx, _), (min_idx, _) = find_extrema(x)
    return int(max_idx.size + min_idx.size)


def is_imf(x: np.ndarray) -> bool:
    """Mode condition: extrema and zero-crossing counts differ by <= 1."""
    return abs(count_extrema(x) - zero_crossings(x)) <= 1


def _is_monotonic(x: np.ndarray) -> bool:
    d = np.diff(x)
    return bool(np.all(d >= 0) or np.all(d <= 0))


def extract_imf(x: np.ndarray, cfg: SiftConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sift one intrinsic mode function out of a sequence.

    Iterates h <- h - mean(upper, lower envelopes) until the relative
    change between iterates drops below cfg.sd_threshold and the mode
    condition holds, or cfg.max_sift_iters is reached.  Stubborn
    same-sign ripples resolve slowly, so sifting may run past
    cfg.max_sift_iters while the mode condition is still unmet, up to
    four times the configured cap.  Returns the component and the
    remainder x - component.

    Raises:
        NoImfError: x is monotonic/constant (nothing to extract).
    """
    x = np.asarray(x, dtype=np.float64)
    if _is_monotonic(x):
        raise NoImfError("input is monotonic or constant")
    h = x.copy()
    hard_cap = 4 * cfg.max_sift_iters
    for iteration in range(1, hard_cap + 1):
        try:
            upper, lower = envelopes(h)
        except InsufficientExtremaError:
            if iteration == 1:
                raise NoImfError("too few extrema to start sifting") from None
            break
        h_next = h - 0.5 * (upper + lower)
        prev_energy = float(np.sum(h**2))
        if prev_energy == 0.0:
            h = h_next
            break
        sd = float(np.sum((h - h_next) ** 2)) / prev_energy
        h = h_next
        if is_imf(h) and (sd < cfg.sd_threshold or iteration >= cfg.max_sift_iters):
            break
    return h, x - h


def decompose(signal: Signal, cfg: SiftConfig | None = None) -> ImfStack:
    """Full decomposition of a signal into modes plus a residue.

    Components are extracted from the running remainder until it turns
    monotonic or constant, or cfg.max_imfs is reached.  A monotonic
    (but non-constant) input yields zero components and itself as the
    residue; a constant input is an error.
    """
    cfg = cfg or SiftConfig()
    x = signal.samples
    if np.all(x == x[0]):
        raise ValueError("cannot decompose a constant signal")
    imfs: list[np.ndarray] = []
    residue = x
    while len(imfs) < cfg.max_imfs:
        if _is_monotonic(residue):
            break
        try:
            imf, residue = extract_imf(residue, cfg)
        except NoImfError:
            break
        imfs.append(imf)
    return ImfStack(tuple(imfs), residue.copy(), x.size)


def to_fixed_13(stack: ImfStack, affine: AffineParams) -> Imf13:
    """Collapse a variable-depth stack onto exactly 13 channels.

    Channels 1..12 hold the first twelve components (zeros where the
    stack is shallower); channel 13 is the sum of components 13 onward
    plus the residue.  Channel sums equal the source exactly, as the
    stack itself did.
    """
    n = stack.source_length
    channels = np.zeros((N_FIXED_CHANNELS, n))
    head = min(stack.n_imfs, N_FIXED_CHANNELS - 1)
    for i in range(head):
        channels[i] = stack.imfs[i]
    tail = stack.residue.copy()
    for imf in stack.imfs[N_FIXED_CHANNELS - 1 :]:
        tail += imf
    channels[N_FIXED_CHANNELS - 1] = tail
    return Imf13(channels, affine)


def dump_imf_stack(stack: ImfStack, path) -> None:
    """Write the stack as columns of text: one per component, then the residue."""
    names = [f"imf{i + 1}" for i in range(stack.n_imfs)] + ["residue"]
    table = np.column_stack(list(stack.imfs) + [stack.residue])
    np.savetxt(path, table, fmt="%.18e", header=" ".join(names))
