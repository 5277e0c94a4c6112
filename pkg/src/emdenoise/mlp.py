"""Per-sample MLP denoiser over the 13-channel mode representation.

The network maps the 13 mode values at one time index to the clean
sample at that index: tanh hidden layers, a single linear output.
Training minimizes mean squared error with a damped Gauss-Newton
(Levenberg-Marquardt) loop over seeded random row blocks; a plain
fixed-step gradient-descent trainer is available as a fallback.  All
randomness (weight init, block sampling, dataset contamination) is
seeded, so a (structure, seed, dataset) triple fixes the trained model
bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .emd import Imf13, SiftConfig, SiftError, decompose, to_fixed_13
from .noise import gen_pink, gen_white, mix_at_snr
from .signals import Signal, denormalize, normalize

logger = logging.getLogger(__name__)

N_INPUTS = 13

# Named structures: input 13, one or two tanh hidden layers, linear output.
ANN_STRUCTURES = {
    "ann1": (13, 35, 1),
    "ann2": (13, 65, 1),
    "ann3": (13, 95, 1),
    "ann4": (13, 25, 15, 1),
    "ann5": (13, 25, 20, 1),
    "ann6": (13, 25, 25, 1),
    "ann7": (13, 35, 15, 1),
    "ann8": (13, 35, 20, 1),
    "ann9": (13, 45, 10, 1),
}

MODEL_FORMAT = "emdenoise-mlp"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Model file has the wrong magic, version, or structure."""


class TrainingError(RuntimeError):
    """The damping schedule exhausted itself without an acceptable step."""


@dataclass
class MlpModel:
    """Feed-forward network state: sizes, weights, biases, activations."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]  # one (out, in) matrix per layer
    biases: list[np.ndarray]  # one (out,) vector per layer
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    seed: int = 0
    epochs_trained: int = 0

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if self.layer_sizes[0] != N_INPUTS or self.layer_sizes[-1] != 1:
            raise ValueError(
                f"layer sizes must run from {N_INPUTS} inputs to 1 output, got {self.layer_sizes}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != expect or b.shape != (expect[0],):
                raise ValueError(f"layer {i} shapes {w.shape}/{b.shape} do not match {expect}")
        if self.hidden_activation != "tanh" or self.output_activation != "linear":
            raise ValueError("only tanh hidden / linear output activations are supported")

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def clone(self) -> "MlpModel":
        return replace(
            self,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass(frozen=True)
class TrainSpec:
    """Training protocol: structure, epochs, damping schedule, data mix."""

    structure: str | tuple[int, ...] = "ann5"
    epochs: int = 200
    lm_lambda0: float = 1e-3
    lm_lambda_up: float = 10.0
    lm_lambda_down: float = 0.1
    lm_lambda_max: float = 1e10
    block_rows: int = 2048
    final_block_rows: int = 65536
    final_epochs: int = 50
    final_avg_epochs: int = 15
    snr_set: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    noise_kinds: tuple[str, ...] = ("white",)
    pink_alpha: float = 1.0
    optimizer: str = "lm"
    gd_learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lm_lambda_up > 1.0:
            raise ValueError("lm_lambda_up must exceed 1")
        if not 0.0 < self.lm_lambda_down < 1.0:
            raise ValueError("lm_lambda_down must lie in (0, 1)")
        if self.block_rows < 1 or self.final_block_rows < 1:
            raise ValueError("block sizes must be >= 1")
        if self.final_epochs < 0 or self.final_avg_epochs < 0:
            raise ValueError("final epoch counts must be >= 0")
        if not self.snr_set:
            raise ValueError("snr_set must be non-empty")
        if not self.noise_kinds or any(k not in ("white", "pink") for k in self.noise_kinds):
            raise ValueError(f"noise_kinds must be a non-empty subset of white/pink, got {self.noise_kinds}")
        if self.optimizer not in ("lm", "gd"):
            raise ValueError(f"optimizer must be 'lm' or 'gd', got {self.optimizer!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SampleDataset:
    """Per-sample training rows: 13 mode values in, one clean value out.

    Provenance arrays record which (cycle, noise kind, SNR) produced
    each row, so single-condition subsets can be carved out of a
    combined dataset without re-decomposing anything.
    """

    inputs: np.ndarray  # (m, 13)
    targets: np.ndarray  # (m,)
    cycle_ids: np.ndarray  # (m,) int32
    kinds: np.ndarray  # (m,) unicode
    snrs_db: np.ndarray  # (m,) float64

    def __post_init__(self):
        m = self.inputs.shape[0]
        if self.inputs.ndim != 2 or self.inputs.shape[1] != N_INPUTS:
            raise ValueError(f"inputs must be (m, {N_INPUTS}), got {self.inputs.shape}")
        for name, arr in (("targets", self.targets), ("cycle_ids", self.cycle_ids),
                          ("kinds", self.kinds), ("snrs_db", self.snrs_db)):
            if arr.shape != (m,):
                raise ValueError(f"{name} must have {m} rows, got {arr.shape}")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, kind: str | None = None, snr_db: float | None = None) -> "SampleDataset":
        mask = np.ones(len(self), dtype=bool)
        if kind is not None:
            mask &= self.kinds == kind
        if snr_db is not None:
            mask &= self.snrs_db == snr_db
        return SampleDataset(
            self.inputs[mask], self.targets[mask], self.cycle_ids[mask],
            self.kinds[mask], self.snrs_db[mask],
        )


def build_mlp(structure: str | tuple[int, ...], seed: int) -> MlpModel:
    """Create a network with seeded uniform [-s, s] init, s scaled by fan sizes.

    structure is either a named id (ann1..ann9) or an explicit size
    tuple running from 13 inputs to 1 output.
    """
    if isinstance(structure, str):
        key = structure.lower()
        if key not in ANN_STRUCTURES:
            raise ValueError(f"unknown structure {structure!r}; expected one of {sorted(ANN_STRUCTURES)}")
        sizes = ANN_STRUCTURES[key]
    else:
        sizes = tuple(int(s) for s in structure)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"malformed layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, seed=seed)


def _activations(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    """Forward pass keeping every layer's activation, batch first."""
    acts = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return acts


def forward_batch(model: MlpModel, rows: np.ndarray) -> np.ndarray:
    """Network output for a (m, 13) batch of rows, shape (m,)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != N_INPUTS:
        raise ValueError(f"rows must be (m, {N_INPUTS}), got {rows.shape}")
    return _activations(model, rows)[-1][:, 0]


def forward(model: MlpModel, input_row: np.ndarray) -> float:
    """Network output for one 13-value row."""
    row = np.asarray(input_row, dtype=np.float64)
    if row.shape != (N_INPUTS,):
        raise ValueError(f"input_row must have shape ({N_INPUTS},), got {row.shape}")
    return float(forward_batch(model, row[None, :])[0])


def jacobian(model: MlpModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outputs and per-row output/parameter derivatives.

    Returns (outputs (m,), J (m, P)) with parameters ordered layer by
    layer, each layer's weight matrix row-major followed by its biases.
    """
    rows = np.asarray(rows, dtype=np.float64)
    m = rows.shape[0]
    acts = _activations(model, rows)
    outputs = acts[-1][:, 0]
    n_layers = len(model.weights)
    jac = np.empty((m, model.n_params()))
    offsets = []
    pos = 0
    for w, b in zip(model.weights, model.biases):
        offsets.append(pos)
        pos += w.size + b.size
    delta = np.ones((m, 1))  # d(output)/d(last pre-activation), linear output
    for layer in range(n_layers - 1, -1, -1):
        a_prev = acts[layer]
        w = model.weights[layer]
        start = offsets[layer]
        dw = jac[:, start : start + w.size].reshape(m, w.shape[0], w.shape[1])
        np.multiply(delta[:, :, None], a_prev[:, None, :], out=dw)
        jac[:, start + w.size : start + w.size + w.shape[0]] = delta
        if layer > 0:
            delta = (delta @ w) * (1.0 - a_prev**2)
    return outputs, jac


def mse(model: MlpModel, rows: np.ndarray, targets: np.ndarray) -> float:
    r = forward_batch(model, rows) - targets
    return float(np.mean(r**2))


def mse_gradient(model: MlpModel, rows: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its flat gradient (same order as jacobian)."""
    rows = np.asarray(rows, dtype=np.float64)
    m = rows.shape[0]
    acts = _activations(model, rows)
    r = acts[-1][:, 0] - targets
    loss = float(np.mean(r**2))
    delta = (2.0 / m) * r[:, None]
    n_layers = len(model.weights)
    blocks: list[np.ndarray] = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        a_prev = acts[layer]
        dw = delta.T @ a_prev
        blocks[layer] = np.concatenate([dw.ravel(), delta.sum(axis=0)])
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (1.0 - a_prev**2)
    return loss, np.concatenate(blocks)


def _apply_step(model: MlpModel, step: np.ndarray) -> MlpModel:
    out = model.clone()
    pos = 0
    for w, b in zip(out.weights, out.biases):
        w += step[pos : pos + w.size].reshape(w.shape)
        pos += w.size
        b += step[pos : pos + b.size]
        pos += b.size
    return out


def _normal_equations(
    model: MlpModel, rows: np.ndarray, targets: np.ndarray, chunk: int = 4096
) -> tuple[np.ndarray, np.ndarray, float]:
    """Accumulate J^T J, J^T r and the block MSE without storing a huge J."""
    n_params = model.n_params()
    jtj = np.zeros((n_params, n_params))
    jtr = np.zeros(n_params)
    squared = 0.0
    for start in range(0, rows.shape[0], chunk):
        outputs, jac = jacobian(model, rows[start : start + chunk])
        residual = outputs - targets[start : start + chunk]
        jtj += jac.T @ jac
        jtr += jac.T @ residual
        squared += float(np.sum(residual**2))
    return jtj, jtr, squared / rows.shape[0]


def _solve_damped(jtj: np.ndarray, jtr: np.ndarray, lam: float) -> np.ndarray | None:
    """Solve (J^T J + lam I) step = -J^T r via Cholesky; None if not SPD."""
    system = jtj.copy()
    system[np.diag_indices_from(system)] += lam
    try:
        return cho_solve(cho_factor(system, lower=True, check_finite=False), -jtr, check_finite=False)
    except np.linalg.LinAlgError:
        return None


def train_lm(
    model: MlpModel, data: SampleDataset, spec: TrainSpec
) -> tuple[MlpModel, list[float]]:
    """Levenberg-Marquardt training over seeded random row blocks.

    Each epoch draws one block, builds the Gauss-Newton normal
    equations (J^T J + lambda I) step = -J^T r, and adapts lambda:
    shrink on an accepted step, grow and retry on a rejected one.  When
    the epoch budget cannot cover the dataset even once at
    spec.block_rows per epoch, the last spec.final_epochs draw
    spec.final_block_rows rows instead, so the final steps see
    low-variance curvature (small blocks alone leave a large-dataset
    model short of the pooled optimum), and the returned weights are
    the running average over the last spec.final_avg_epochs of those
    refinement epochs (tail averaging damps the remaining step noise).
    The returned history holds the block loss at each accepted step;
    when the dataset fits in one block it is the full-dataset MSE and
    never increases.

    Raises:
        TrainingError: lambda exceeded spec.lm_lambda_max with no
            acceptable step (diagnostic includes the epoch and loss).
    """
    if len(data) == 0:
        raise ValueError("dataset is empty")
    model = model.clone()
    rng = np.random.default_rng(spec.seed)
    lam = spec.lm_lambda0
    history: list[float] = []
    covered = spec.epochs * spec.block_rows >= len(data)
    refine_from = spec.epochs if covered else spec.epochs - min(spec.final_epochs, spec.epochs)
    average_from = spec.epochs - min(spec.final_avg_epochs, spec.epochs - refine_from)
    tail_sum: MlpModel | None = None
    tail_count = 0
    for epoch in range(spec.epochs):
        wanted = spec.block_rows if epoch < refine_from else spec.final_block_rows
        block = min(wanted, len(data))
        idx = rng.permutation(len(data))[:block]
        rows = data.inputs[idx]
        targets = data.targets[idx]
        jtj, jtr, loss_before = _normal_equations(model, rows, targets)
        while True:
            step = _solve_damped(jtj, jtr, lam)
            if step is not None and np.all(np.isfinite(step)):
                candidate = _apply_step(model, step)
                loss_after = mse(candidate, rows, targets)
                if np.isfinite(loss_after) and loss_after <= loss_before:
                    model = candidate
                    lam = lam * spec.lm_lambda_down
                    history.append(loss_after)
                    break
            lam = lam * spec.lm_lambda_up
            if lam > spec.lm_lambda_max:
                raise TrainingError(
                    f"no acceptable step at epoch {epoch}: lambda {lam:.3g} exceeds "
                    f"{spec.lm_lambda_max:.3g}, block loss {loss_before:.6g}"
                )
        if epoch >= average_from:
            if tail_sum is None:
                tail_sum = model.clone()
            else:
                for acc, w in zip(tail_sum.weights, model.weights):
                    acc += w
                for acc, b in zip(tail_sum.biases, model.biases):
                    acc += b
            tail_count += 1
    if tail_count > 1:
        for w in tail_sum.weights:
            w /= tail_count
        for b in tail_sum.biases:
            b /= tail_count
        model = tail_sum
    model.epochs_trained += spec.epochs
    return model, history


def train_gd(
    model: MlpModel, data: SampleDataset, spec: TrainSpec
) -> tuple[MlpModel, list[float]]:
    """Fixed-step full-batch gradient descent fallback."""
    if len(data) == 0:
        raise ValueError("dataset is empty")
    model = model.clone()
    history: list[float] = []
    for _ in range(spec.epochs):
        _, grad = mse_gradient(model, data.inputs, data.targets)
        model = _apply_step(model, -spec.gd_learning_rate * grad)
        history.append(mse(model, data.inputs, data.targets))
    model.epochs_trained += spec.epochs
    return model, history


def train(model: MlpModel, data: SampleDataset, spec: TrainSpec) -> tuple[MlpModel, list[float]]:
    """Train with the optimizer the spec names."""
    if spec.optimizer == "gd":
        return train_gd(model, data, spec)
    return train_lm(model, data, spec)


def combo_seed(base_seed: int, cycle_idx: int, kind: str, snr_idx: int) -> int:
    """Deterministic per-(cycle, kind, SNR) contamination seed.

    Derived through numpy's SeedSequence so nearby inputs give
    independent streams; documented because replaying a dataset build
    from the command line relies on it.
    """
    kind_idx = ("white", "pink").index(kind)
    ss = np.random.SeedSequence((base_seed, cycle_idx, kind_idx, snr_idx))
    return int(ss.generate_state(1)[0])


def make_dataset(
    cycles: list[Signal], spec: TrainSpec, cfg: SiftConfig | None = None
) -> SampleDataset:
    """Contaminate, rescale, decompose and flatten cycles into rows.

    For every (cycle, noise kind, SNR) combination the clean cycle is
    mixed to the target SNR, rescaled to [-1, 1], decomposed, and
    reduced to 13 channels; each time index becomes one row.  The clean
    target is rescaled with the same min/max pair as its noisy mixture
    so the additive relation survives in the training domain.  A
    combination whose decomposition fails is skipped with a warning;
    it is an error only if every cycle fails.
    """
    if not cycles:
        raise ValueError("cycles must be non-empty")
    cfg = cfg or SiftConfig()
    blocks_in, blocks_t, blocks_c, blocks_k, blocks_s = [], [], [], [], []
    ok_cycles: set[int] = set()
    for cycle_idx, clean in enumerate(cycles):
        for kind in spec.noise_kinds:
            for snr_idx, snr in enumerate(spec.snr_set):
                seed = combo_seed(spec.seed, cycle_idx, kind, snr_idx)
                n = len(clean)
                if kind == "white":
                    raw = gen_white(n, seed)
                else:
                    raw = gen_pink(n, spec.pink_alpha, seed)
                noisy, _ = mix_at_snr(clean, raw, snr)
                try:
                    norm, affine = normalize(noisy)
                    stack = decompose(norm, cfg)
                except (SiftError, ValueError) as exc:
                    logger.warning(
                        "skipping cycle %d (%s, %g dB): %s", cycle_idx, kind, snr, exc
                    )
                    continue
                fixed = to_fixed_13(stack, affine)
                blocks_in.append(fixed.rows())
                blocks_t.append(affine.apply(clean.samples))
                blocks_c.append(np.full(n, cycle_idx, dtype=np.int32))
                blocks_k.append(np.full(n, kind, dtype="U5"))
                blocks_s.append(np.full(n, float(snr)))
                ok_cycles.add(cycle_idx)
    if not ok_cycles:
        raise ValueError("decomposition failed for every cycle")
    return SampleDataset(
        np.concatenate(blocks_in),
        np.concatenate(blocks_t),
        np.concatenate(blocks_c),
        np.concatenate(blocks_k),
        np.concatenate(blocks_s),
    )


def apply_model(model: MlpModel, fixed: Imf13) -> np.ndarray:
    """Denoised samples (rescaled domain) for a 13-channel decomposition."""
    return forward_batch(model, fixed.rows())


def denoise_ann(noisy: Signal, model: MlpModel, cfg: SiftConfig | None = None) -> Signal:
    """Full network pipeline: rescale, decompose, map, restore scale."""
    cfg = cfg or SiftConfig()
    norm, affine = normalize(noisy)
    stack = decompose(norm, cfg)
    fixed = to_fixed_13(stack, affine)
    out = apply_model(model, fixed)
    return denormalize(Signal(out, noisy.sample_rate), affine)


def save_model(model: MlpModel, path) -> None:
    """Write the model as versioned JSON with flat row-major weights."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "seed": model.seed,
        "epochs_trained": model.epochs_trained,
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path) -> MlpModel:
    """Read a model written by save_model; round trip is bit-exact."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path} is not a valid model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} lacks the {MODEL_FORMAT!r} magic")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path} has version {payload.get('version')}, expected {MODEL_VERSION}"
        )
    sizes = tuple(payload["layer_sizes"])
    try:
        weights = [
            np.array(flat, dtype=np.float64).reshape(sizes[i + 1], sizes[i])
            for i, flat in enumerate(payload["weights"])
        ]
        biases = [np.array(b, dtype=np.float64) for b in payload["biases"]]
        return MlpModel(
            sizes,
            weights,
            biases,
            hidden_activation=payload["hidden_activation"],
            output_activation=payload["output_activation"],
            seed=int(payload["seed"]),
            epochs_trained=int(payload["epochs_trained"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path} holds a malformed model: {exc}") from exc
