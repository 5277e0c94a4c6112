"""Benchmark harness: train/test protocol, SNR sweeps, report export.

Protocol: the first chunk of the clean cycles trains the networks, the
remainder is held out for testing.  Every (cycle, noise kind, SNR)
mixture, every model's initial weights, and every block shuffle gets a
seed derived from the base seed through numpy's SeedSequence, so a run
is a pure function of its configuration and reruns are byte-identical.

All metrics are computed on the 16-bit grid the WAV pipeline stores:
mixtures, clean references, and denoised outputs are snapped to that
grid before scoring.  This makes a benchmark cell exactly reproducible
by the file-based command-line route (synth -> noise -> denoise ->
eval); the grid error (about -90 dB) is far below anything measured.
Scores live in the [-1, 1]-rescaled domain of each noisy mixture, the
same domain the networks train in.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .emd import SiftConfig, decompose, to_fixed_13
from .mlp import (
    MlpModel,
    SampleDataset,
    TrainSpec,
    apply_model,
    build_mlp,
    make_dataset,
    train,
)
from .noise import gen_pink, gen_white, mix_at_snr
from .signals import Signal, normalize, wav_quantize
from .thresholding import CustomParams, DEFAULT_C_CONST, build_plan, threshold_stack

CSV_COLUMNS = ("method", "noise_kind", "train_snr_set", "test_snr_db", "out_snr_db", "fit_pct", "seed")

STANDARD_SWEEP_MODELS = (
    ("white", "white"),
    ("pink", "pink"),
    ("white-pink", "white"),
    ("white-pink", "pink"),
)

_TRAIN_KIND_SETS = {
    "white": ("white",),
    "pink": ("pink",),
    "white-pink": ("white", "pink"),
}

# Previously reported results for these methods on their original
# (non-public) recording corpus.  Rendered beside synthetic-corpus
# numbers for orientation only; never asserted against.
REFERENCE_RESULTS: dict[tuple[str, str, float], tuple[float, float]] = {
    ("ann-individual", "white", 0.0): (10.22, 89.45),
    ("ann-individual", "white", 5.0): (13.80, 95.32),
    ("ann-individual", "white", 10.0): (17.64, 98.04),
    ("ann-individual", "white", 15.0): (21.53, 99.20),
    ("ann-individual", "white", 20.0): (24.86, 99.63),
    ("ann-individual", "pink", 0.0): (8.74, 85.49),
    ("ann-individual", "pink", 5.0): (12.18, 93.35),
    ("ann-individual", "pink", 10.0): (15.81, 97.11),
    ("ann-individual", "pink", 15.0): (17.22, 97.99),
    ("ann-individual", "pink", 20.0): (20.67, 98.87),
    ("ann-combined", "white", 0.0): (9.41, 87.22),
    ("ann-combined", "white", 5.0): (13.23, 94.67),
    ("ann-combined", "white", 10.0): (16.76, 97.63),
    ("ann-combined", "white", 15.0): (19.53, 98.71),
    ("ann-combined", "white", 20.0): (21.01, 98.86),
    ("ann-combined", "pink", 0.0): (8.23, 83.53),
    ("ann-combined", "pink", 5.0): (11.31, 91.86),
    ("ann-combined", "pink", 10.0): (14.63, 96.36),
    ("ann-combined", "pink", 15.0): (17.19, 98.03),
    ("ann-combined", "pink", 20.0): (20.45, 99.06),
    ("emd-custom", "white", 0.0): (5.89, 74.25),
    ("emd-custom", "white", 5.0): (9.97, 89.92),
    ("emd-custom", "white", 10.0): (13.00, 94.99),
    ("emd-custom", "white", 15.0): (15.93, 96.78),
    ("emd-custom", "white", 20.0): (16.28, 97.04),
    ("emd-custom", "pink", 0.0): (4.31, 62.96),
    ("emd-custom", "pink", 5.0): (8.56, 86.08),
    ("emd-custom", "pink", 10.0): (11.89, 93.53),
    ("emd-custom", "pink", 15.0): (14.20, 96.20),
    ("emd-custom", "pink", 20.0): (15.16, 96.95),
}


@dataclass(frozen=True)
class EvalRow:
    """One benchmark cell: a method under one noise condition."""

    method: str
    noise_kind: str
    train_snr_set: tuple[float, ...]
    test_snr_db: float
    out_snr_db: float
    fit_pct: float
    seed: int


@dataclass(frozen=True)
class EvalReport:
    """An ordered collection of benchmark cells."""

    rows: tuple[EvalRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def cell(self, method: str, noise_kind: str, test_snr_db: float) -> EvalRow:
        for row in self.rows:
            if (row.method, row.noise_kind, row.test_snr_db) == (method, noise_kind, test_snr_db):
                return row
        raise KeyError((method, noise_kind, test_snr_db))

    def sorted(self) -> "EvalReport":
        key = lambda r: (r.method, r.noise_kind, r.test_snr_db)
        return EvalReport(tuple(sorted(self.rows, key=key)))


@dataclass(frozen=True)
class SweepSpec:
    """Grid and model pairings for the input-SNR sweep."""

    snr_min: float = -2.0
    snr_max: float = 20.0
    step: float = 1.0
    models: tuple[tuple[str, str], ...] = STANDARD_SWEEP_MODELS
    trials: int = 3

    def __post_init__(self):
        if self.snr_min > self.snr_max:
            raise ValueError("snr_min must not exceed snr_max")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for pair in self.models:
            train_label, test_kind = pair
            if train_label not in _TRAIN_KIND_SETS or test_kind not in ("white", "pink"):
                raise ValueError(f"unknown model pairing {pair}")

    def grid(self) -> list[float]:
        count = int(round((self.snr_max - self.snr_min) / self.step)) + 1
        return [float(self.snr_min + self.step * i) for i in range(count)]


def _snr_key(snr_db: float) -> int:
    # SeedSequence entropy must be non-negative integers.
    return int(round(snr_db * 1000.0)) + 1_000_000


def _kinds_key(kinds: tuple[str, ...]) -> int:
    return sum(1 << ("white", "pink").index(k) for k in kinds)


def _derive(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def mixture_seed(base_seed: int, trial: int, kind: str, snr_db: float, cycle_idx: int) -> int:
    """Seed of the test noise for one held-out mixture."""
    return _derive(base_seed, 1, trial, ("white", "pink").index(kind), _snr_key(snr_db), cycle_idx)


def dataset_seed(base_seed: int, trial: int, kind: str) -> int:
    """Seed of a per-kind training dataset build."""
    return _derive(base_seed, 2, trial, ("white", "pink").index(kind))


def model_init_seed(base_seed: int, trial: int, kinds: tuple[str, ...], snr_db: float | None) -> int:
    """Seed of a model's initial weights."""
    return _derive(base_seed, 3, trial, _kinds_key(kinds), 0 if snr_db is None else _snr_key(snr_db))


def shuffle_seed(base_seed: int, trial: int, kinds: tuple[str, ...], snr_db: float | None) -> int:
    """Seed of a training run's block shuffling."""
    return _derive(base_seed, 4, trial, _kinds_key(kinds), 0 if snr_db is None else _snr_key(snr_db))


def concat_datasets(datasets: list[SampleDataset]) -> SampleDataset:
    """Stack datasets row-wise in the given order."""
    return SampleDataset(
        np.concatenate([d.inputs for d in datasets]),
        np.concatenate([d.targets for d in datasets]),
        np.concatenate([d.cycle_ids for d in datasets]),
        np.concatenate([d.kinds for d in datasets]),
        np.concatenate([d.snrs_db for d in datasets]),
    )


def build_training_dataset(
    train_cycles: list[Signal],
    train_spec: TrainSpec,
    sift_cfg: SiftConfig,
    trial: int,
    kind: str,
) -> SampleDataset:
    """The per-kind training dataset a benchmark trial uses."""
    spec = replace(
        train_spec,
        noise_kinds=(kind,),
        seed=dataset_seed(train_spec.seed, trial, kind),
    )
    return make_dataset(train_cycles, spec, sift_cfg)


def train_bench_model(
    train_cycles: list[Signal],
    train_spec: TrainSpec,
    sift_cfg: SiftConfig,
    trial: int,
    kinds: tuple[str, ...],
    snr_db: float | None = None,
    datasets: dict[str, SampleDataset] | None = None,
) -> MlpModel:
    """Train one benchmark model: combined over kinds, or one fixed SNR.

    This is the exact code path the experiment runners use, so a model
    trained from the command line with the same configuration matches
    the benchmark's model bit for bit.  `datasets` optionally caches
    per-kind datasets across calls.
    """
    if datasets is None:
        datasets = {}
    for kind in kinds:
        if kind not in datasets:
            datasets[kind] = build_training_dataset(train_cycles, train_spec, sift_cfg, trial, kind)
    data = concat_datasets([datasets[k] for k in kinds]) if len(kinds) > 1 else datasets[kinds[0]]
    if snr_db is not None:
        data = data.subset(snr_db=snr_db)
    base = train_spec.seed
    initial = build_mlp(train_spec.structure, model_init_seed(base, trial, kinds, snr_db))
    run_spec = replace(
        train_spec,
        noise_kinds=kinds,
        seed=shuffle_seed(base, trial, kinds, snr_db),
    )
    trained, _ = train(initial, data, run_spec)
    return trained


class _TrialContext:
    """Per-trial caches: training datasets and trained models."""

    def __init__(self, train_cycles, train_spec, sift_cfg, trial):
        self.train_cycles = train_cycles
        self.train_spec = train_spec
        self.sift_cfg = sift_cfg
        self.trial = trial
        self.datasets: dict[str, SampleDataset] = {}
        self.models: dict[tuple, MlpModel] = {}

    def model(self, kinds: tuple[str, ...], snr_db: float | None) -> MlpModel:
        key = (kinds, snr_db)
        if key not in self.models:
            self.models[key] = train_bench_model(
                self.train_cycles, self.train_spec, self.sift_cfg,
                self.trial, kinds, snr_db, self.datasets,
            )
        return self.models[key]


def _evaluate_mixture(
    clean: Signal,
    kind: str,
    snr_db: float,
    cycle_idx: int,
    trial: int,
    base_seed: int,
    sift_cfg: SiftConfig,
    pink_alpha: float,
    engines: list[tuple],
    models: dict[tuple, MlpModel],
    custom_params: CustomParams,
    c_const: float,
) -> dict[tuple, tuple[float, float]]:
    """Score every engine on one contaminated held-out cycle.

    One decomposition serves all engines.  Mixture, reference and
    outputs are snapped to the WAV grid before scoring, mirroring the
    file pipeline exactly.
    """
    seed = mixture_seed(base_seed, trial, kind, snr_db, cycle_idx)
    n = len(clean)
    raw = gen_white(n, seed) if kind == "white" else gen_pink(n, pink_alpha, seed)
    noisy, _ = mix_at_snr(clean, raw, snr_db)
    norm, affine = normalize(noisy)
    stored = Signal(wav_quantize(norm.samples), clean.sample_rate)
    reference = wav_quantize(affine.apply(clean.samples))
    norm_q, affine_q = normalize(stored)
    stack = decompose(norm_q, sift_cfg)
    fixed = None
    results = {}
    for engine in engines:
        if engine[0] == "model":
            _, kinds, model_snr = engine
            if fixed is None:
                fixed = to_fixed_13(stack, affine_q)
            out = affine_q.invert(apply_model(models[(kinds, model_snr)], fixed))
        else:
            plan = build_plan(stack, c_const)
            out = affine_q.invert(threshold_stack(stack, plan, "custom", custom_params))
        out = wav_quantize(out)
        results[engine] = (metrics.snr_db(reference, out), metrics.fit_pct(reference, out))
    return results


_WORKER_STATE: dict = {}


def _init_worker(state: dict) -> None:
    _WORKER_STATE.update(state)


def _worker_build_dataset(kind: str):
    st = _WORKER_STATE
    return kind, build_training_dataset(
        st["train_cycles"], st["train_spec"], st["sift_cfg"], st["trial"], kind
    )


def _worker_evaluate(task: tuple):
    kind, snr, cycle_idx = task
    st = _WORKER_STATE
    scored = _evaluate_mixture(
        st["test_cycles"][cycle_idx], kind, snr, cycle_idx, st["trial"],
        st["base_seed"], st["sift_cfg"], st["pink_alpha"],
        st["engines_for"][(kind, snr)], st["models"], st["custom_params"],
        st["c_const"],
    )
    return task, scored


def _worker_count() -> int:
    return min(2, os.cpu_count() or 1)


def _build_requirements(want_table3, want_table4, sweep_spec, train_spec):
    """Row keys per report plus the consumer map per (kind, snr)."""
    snrs = tuple(float(s) for s in train_spec.snr_set)
    report_rows = {"table3": [], "table4": [], "sweep": []}
    consumers = defaultdict(list)
    if want_table3:
        for kind in ("white", "pink"):
            for snr in snrs:
                row = ("ann-individual", kind, (snr,), snr)
                report_rows["table3"].append(row)
                consumers[(kind, snr)].append((row, ("model", (kind,), snr)))
                row = ("ann-combined", kind, snrs, snr)
                report_rows["table3"].append(row)
                consumers[(kind, snr)].append((row, ("model", (kind,), None)))
    if want_table4:
        for kind in ("white", "pink"):
            for snr in snrs:
                row = ("emd-ann", kind, snrs, snr)
                report_rows["table4"].append(row)
                consumers[(kind, snr)].append((row, ("model", (kind,), None)))
                row = ("emd-custom", kind, (), snr)
                report_rows["table4"].append(row)
                consumers[(kind, snr)].append((row, ("custom",)))
    if sweep_spec is not None:
        for train_label, test_kind in sweep_spec.models:
            kinds = _TRAIN_KIND_SETS[train_label]
            for snr in sweep_spec.grid():
                row = (f"ann-{train_label}", test_kind, snrs, snr)
                report_rows["sweep"].append(row)
                consumers[(test_kind, snr)].append((row, ("model", kinds, None)))
    return report_rows, consumers


def _run_experiments(
    cycles: list[Signal],
    sift_cfg: SiftConfig,
    train_spec: TrainSpec,
    *,
    trials: int,
    n_train: int | None,
    want_table3: bool,
    want_table4: bool,
    sweep_spec: SweepSpec | None,
    custom_params: CustomParams | None,
    c_const: float,
) -> dict[str, EvalReport]:
    if len(cycles) < 2:
        raise ValueError("need at least 2 cycles to split into train and test")
    if n_train is None:
        n_train = max(1, round(len(cycles) * 3 / 4))
    if not 1 <= n_train < len(cycles):
        raise ValueError(f"n_train {n_train} leaves no train or no test cycles")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    train_cycles = cycles[:n_train]
    test_cycles = cycles[n_train:]
    custom_params = custom_params or CustomParams()
    base_seed = train_spec.seed

    report_rows, consumers = _build_requirements(want_table3, want_table4, sweep_spec, train_spec)
    mixtures = sorted(consumers, key=lambda key: (("white", "pink").index(key[0]), key[1]))
    engines_for = {}
    model_engines = []
    for key in mixtures:
        engines = []
        for _, engine in consumers[key]:
            if engine not in engines:
                engines.append(engine)
            if engine[0] == "model" and engine not in model_engines:
                model_engines.append(engine)
        engines_for[key] = engines
    train_kinds = []
    for _, kinds, _ in model_engines:
        for kind in kinds:
            if kind not in train_kinds:
                train_kinds.append(kind)

    workers = _worker_count()
    spawn = multiprocessing.get_context("spawn")
    cycle_samples = len(test_cycles[0])
    # Process pools only pay off for substantial decomposition work.
    parallel_datasets = (
        workers > 1
        and len(train_kinds) > 1
        and len(train_cycles) * len(train_spec.snr_set) * cycle_samples >= 1_000_000
    )
    snr_values = defaultdict(list)
    fit_values = defaultdict(list)
    for trial in range(trials):
        ctx = _TrialContext(train_cycles, train_spec, sift_cfg, trial)
        # Per-kind training datasets are independent: build them side by side.
        if parallel_datasets:
            state = {
                "train_cycles": train_cycles,
                "train_spec": train_spec,
                "sift_cfg": sift_cfg,
                "trial": trial,
            }
            with ProcessPoolExecutor(workers, mp_context=spawn,
                                     initializer=_init_worker, initargs=(state,)) as pool:
                for kind, dataset in pool.map(_worker_build_dataset, train_kinds):
                    ctx.datasets[kind] = dataset
        models = {}
        for _, kinds, model_snr in model_engines:
            models[(kinds, model_snr)] = ctx.model(kinds, model_snr)

        tasks = [(kind, snr, ci) for kind, snr in mixtures for ci in range(len(test_cycles))]
        scored_by_task = {}
        if workers > 1 and len(tasks) * cycle_samples >= 500_000:
            state = {
                "test_cycles": test_cycles,
                "trial": trial,
                "base_seed": base_seed,
                "sift_cfg": sift_cfg,
                "pink_alpha": train_spec.pink_alpha,
                "engines_for": engines_for,
                "models": models,
                "custom_params": custom_params,
                "c_const": c_const,
            }
            with ProcessPoolExecutor(workers, mp_context=spawn,
                                     initializer=_init_worker, initargs=(state,)) as pool:
                for task, scored in pool.map(_worker_evaluate, tasks, chunksize=4):
                    scored_by_task[task] = scored
        else:
            for task in tasks:
                kind, snr, cycle_idx = task
                scored_by_task[task] = _evaluate_mixture(
                    test_cycles[cycle_idx], kind, snr, cycle_idx, trial, base_seed,
                    sift_cfg, train_spec.pink_alpha, engines_for[(kind, snr)],
                    models, custom_params, c_const,
                )
        # Deterministic assembly order regardless of evaluation order.
        for kind, snr in mixtures:
            entries = consumers[(kind, snr)]
            for cycle_idx in range(len(test_cycles)):
                scored = scored_by_task[(kind, snr, cycle_idx)]
                for row, engine in entries:
                    snr_values[row].append(scored[engine][0])
                    fit_values[row].append(scored[engine][1])

    reports = {}
    for name, rows in report_rows.items():
        if not rows:
            continue
        built = tuple(
            EvalRow(
                method=row[0],
                noise_kind=row[1],
                train_snr_set=row[2],
                test_snr_db=row[3],
                out_snr_db=float(np.mean(snr_values[row])),
                fit_pct=float(np.mean(fit_values[row])),
                seed=base_seed,
            )
            for row in rows
        )
        reports[name] = EvalReport(built)
    return reports


def run_table3(
    cycles: list[Signal],
    sift_cfg: SiftConfig | None = None,
    train_spec: TrainSpec | None = None,
    *,
    trials: int = 3,
    n_train: int | None = None,
) -> EvalReport:
    """Individual-vs-combined comparison over both noise kinds."""
    out = _run_experiments(
        cycles, sift_cfg or SiftConfig(), train_spec or TrainSpec(),
        trials=trials, n_train=n_train, want_table3=True, want_table4=False,
        sweep_spec=None, custom_params=None, c_const=DEFAULT_C_CONST,
    )
    return out["table3"]


def run_table4(
    cycles: list[Signal],
    sift_cfg: SiftConfig | None = None,
    train_spec: TrainSpec | None = None,
    *,
    trials: int = 3,
    n_train: int | None = None,
    custom_params: CustomParams | None = None,
    c_const: float = DEFAULT_C_CONST,
) -> EvalReport:
    """Network-vs-custom-threshold comparison over both noise kinds."""
    out = _run_experiments(
        cycles, sift_cfg or SiftConfig(), train_spec or TrainSpec(),
        trials=trials, n_train=n_train, want_table3=False, want_table4=True,
        sweep_spec=None, custom_params=custom_params, c_const=c_const,
    )
    return out["table4"]


def run_sweep(
    sweep_spec: SweepSpec,
    cycles: list[Signal],
    sift_cfg: SiftConfig | None = None,
    train_spec: TrainSpec | None = None,
    *,
    n_train: int | None = None,
) -> EvalReport:
    """Input-SNR sweep of the combined models over the grid."""
    out = _run_experiments(
        cycles, sift_cfg or SiftConfig(), train_spec or TrainSpec(),
        trials=sweep_spec.trials, n_train=n_train, want_table3=False,
        want_table4=False, sweep_spec=sweep_spec, custom_params=None,
        c_const=DEFAULT_C_CONST,
    )
    return out["sweep"]


def run_bench(
    cycles: list[Signal],
    sift_cfg: SiftConfig | None = None,
    train_spec: TrainSpec | None = None,
    sweep_spec: SweepSpec | None = None,
    *,
    trials: int = 3,
    n_train: int | None = None,
    custom_params: CustomParams | None = None,
    c_const: float = DEFAULT_C_CONST,
) -> dict[str, EvalReport]:
    """All three experiments in one pass, sharing models and mixtures."""
    return _run_experiments(
        cycles, sift_cfg or SiftConfig(), train_spec or TrainSpec(),
        trials=trials, n_train=n_train, want_table3=True, want_table4=True,
        sweep_spec=sweep_spec or SweepSpec(trials=trials),
        custom_params=custom_params, c_const=c_const,
    )


def reference_for(method: str, noise_kind: str, test_snr_db: float) -> tuple[float, float] | None:
    """Previously reported (SNR, fit) for a cell, if one exists."""
    lookup = "ann-combined" if method == "emd-ann" else method
    return REFERENCE_RESULTS.get((lookup, noise_kind, float(test_snr_db)))


def _fmt(value: float) -> str:
    return repr(float(value))


def export_report(report: EvalReport, path, format: str = "csv") -> None:
    """Write a report as CSV or JSON with a stable column order."""
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in report:
                writer.writerow(
                    [
                        row.method,
                        row.noise_kind,
                        "|".join(_fmt(s) for s in row.train_snr_set),
                        _fmt(row.test_snr_db),
                        _fmt(row.out_snr_db),
                        _fmt(row.fit_pct),
                        str(row.seed),
                    ]
                )
    elif format == "json":
        payload = [
            {
                "method": row.method,
                "noise_kind": row.noise_kind,
                "train_snr_set": list(row.train_snr_set),
                "test_snr_db": row.test_snr_db,
                "out_snr_db": row.out_snr_db,
                "fit_pct": row.fit_pct,
                "seed": row.seed,
            }
            for row in report
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")


def load_report(path) -> EvalReport:
    """Read back a JSON report written by export_report."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    rows = tuple(
        EvalRow(
            method=item["method"],
            noise_kind=item["noise_kind"],
            train_snr_set=tuple(item["train_snr_set"]),
            test_snr_db=item["test_snr_db"],
            out_snr_db=item["out_snr_db"],
            fit_pct=item["fit_pct"],
            seed=item["seed"],
        )
        for item in payload
    )
    return EvalReport(rows)


def format_report(report: EvalReport, title: str = "") -> str:
    """Human-readable table with reference columns where they exist."""
    lines = []
    if title:
        lines.append(title)
    header = f"{'method':<18} {'noise':<6} {'snr_in':>7} {'snr_out':>8} {'fit%':>7} {'ref_snr':>8} {'ref_fit':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in report:
        ref = reference_for(row.method, row.noise_kind, row.test_snr_db)
        ref_snr = f"{ref[0]:8.2f}" if ref else f"{'-':>8}"
        ref_fit = f"{ref[1]:8.2f}" if ref else f"{'-':>8}"
        lines.append(
            f"{row.method:<18} {row.noise_kind:<6} {row.test_snr_db:7.1f} "
            f"{row.out_snr_db:8.2f} {row.fit_pct:7.2f} {ref_snr} {ref_fit}"
        )
    return "\n".join(lines)


def input_snr_normalized(clean: Signal, kind: str, snr_db: float, seed: int, pink_alpha: float = 1.0) -> float:
    """Measured SNR of a mixture after the grid snap, for diagnostics."""
    n = len(clean)
    raw = gen_white(n, seed) if kind == "white" else gen_pink(n, pink_alpha, seed)
    noisy, _ = mix_at_snr(clean, raw, snr_db)
    _, affine = normalize(noisy)
    reference = wav_quantize(affine.apply(clean.samples))
    stored = wav_quantize(affine.apply(noisy.samples))
    return metrics.snr_db(reference, stored)
