"""Command-line front end wiring the library into reproducible batch runs.

Subcommands: synth, noise, decompose, train, denoise, eval, bench,
spectrogram.  Every parameter has a documented default; a JSON config
file (--config) overrides defaults, and explicit flags override the
config file.  The config schema mirrors the flag names: top-level keys
are subcommand names (plus "global" for the seed), values are objects
keyed by flag name with dashes replaced by underscores.

Outputs are written to a temporary file and renamed into place, so an
interrupted run never leaves a truncated artifact.  Exit codes: 0 on
success, 2 when an input path does not exist, 1 for any other failure.
Log verbosity comes from the EMDENOISE_LOG environment variable only
(DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import bench as bench_mod
from .emd import SiftConfig, decompose, dump_imf_stack
from .metrics import fit_pct, save_spectrogram_txt, snr_db, spectrogram
from .mlp import TrainSpec, denoise_ann, load_model, save_model
from .noise import gen_pink, gen_white, mix_at_snr
from .signals import (
    BreathSpec,
    Signal,
    load_wav,
    normalize,
    synth_breath_cycle,
    wav_quantize,
    write_wav,
)
from .thresholding import CustomParams, denoise_emd_threshold

DEFAULTS = {
    "global": {"seed": 0},
    "synth": {
        "count": 16,
        "seconds": 5.0,
        "rate": 4000,
        "band_low": 100.0,
        "band_high": 1800.0,
        "peak_hz": 150.0,
        "peak_width_hz": 4.0,
        "floor_fraction": 0.0015,
        "inhale_fraction": 0.4,
        "exhale_gain": 0.5,
    },
    "noise": {"noise": "white", "snr": 0.0, "alpha": 1.0},
    "decompose": {"sd_threshold": 0.2, "max_sift_iters": 100, "max_imfs": 15},
    "train": {
        "structure": "ann5",
        "epochs": 200,
        "noise": "white",
        "snr_set": "0,5,10,15,20",
        "train_snr": None,
        "trial": 0,
        "n_train": None,
        "block_rows": 2048,
        "final_block_rows": 65536,
        "final_epochs": 50,
        "final_avg_epochs": 15,
        "optimizer": "lm",
        "pink_alpha": 1.0,
        "sd_threshold": 0.2,
        "max_sift_iters": 100,
        "max_imfs": 15,
    },
    "denoise": {
        "method": "ann",
        "alpha": 0.5,
        "gamma_ratio": 0.5,
        "c_const": 0.7,
        "sd_threshold": 0.2,
        "max_sift_iters": 100,
        "max_imfs": 15,
    },
    "eval": {},
    "bench": {
        "structure": "ann5",
        "epochs": 200,
        "snr_set": "0,5,10,15,20",
        "trials": 3,
        "n_train": None,
        "block_rows": 2048,
        "final_block_rows": 65536,
        "final_epochs": 50,
        "final_avg_epochs": 15,
        "pink_alpha": 1.0,
        "alpha": 0.5,
        "gamma_ratio": 0.5,
        "c_const": 0.7,
        "sweep_min": -2.0,
        "sweep_max": 20.0,
        "sweep_step": 1.0,
        "sd_threshold": 0.2,
        "max_sift_iters": 100,
        "max_imfs": 15,
    },
    "spectrogram": {"window": 256, "hop": 128},
}


def _atomic_write(path: str, writer) -> None:
    """Run writer(temp_path) then atomically move the result into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_file(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_cycles(directory: str) -> list[Signal]:
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"no such file: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.endswith(".wav"))
    if not names:
        raise ValueError(f"no .wav files under {directory}")
    return [load_wav(os.path.join(directory, n)) for n in names]


def _parse_snr_set(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")


def _kinds(label: str) -> tuple[str, ...]:
    table = {"white": ("white",), "pink": ("pink",), "white-pink": ("white", "pink")}
    if label not in table:
        raise ValueError(f"noise must be white, pink or white-pink, got {label!r}")
    return table[label]


class _Settings:
    """Flag > config file > documented default, per subcommand."""

    def __init__(self, command: str, args: argparse.Namespace):
        config = {}
        if args.config is not None:
            with open(_require_file(args.config), "r", encoding="utf-8") as fh:
                config = json.load(fh)
        self._layers = (
            vars(args),
            config.get(command, {}),
            config.get("global", {}),
            DEFAULTS.get(command, {}),
            DEFAULTS["global"],
        )

    def __getitem__(self, key: str):
        for layer in self._layers:
            if key in layer and layer[key] is not None:
                return layer[key]
        raise KeyError(key)

    def get(self, key: str, fallback=None):
        try:
            return self[key]
        except KeyError:
            return fallback


def _sift_config(cfg: _Settings) -> SiftConfig:
    return SiftConfig(
        sd_threshold=float(cfg["sd_threshold"]),
        max_sift_iters=int(cfg["max_sift_iters"]),
        max_imfs=int(cfg["max_imfs"]),
    )


def cmd_synth(cfg: _Settings) -> int:
    out_dir = cfg["output"]
    os.makedirs(out_dir, exist_ok=True)
    count = int(cfg["count"])
    base_seed = int(cfg["seed"])
    entries = []
    for i in range(count):
        spec = BreathSpec(
            cycle_seconds=float(cfg["seconds"]),
            inhale_fraction=float(cfg["inhale_fraction"]),
            band_low=float(cfg["band_low"]),
            band_high=float(cfg["band_high"]),
            peak_hz=float(cfg["peak_hz"]),
            peak_width_hz=float(cfg["peak_width_hz"]),
            floor_fraction=float(cfg["floor_fraction"]),
            exhale_gain=float(cfg["exhale_gain"]),
            seed=base_seed + i,
        )
        cycle = synth_breath_cycle(spec, int(cfg["rate"]))
        name = f"cycle_{i:03d}.wav"
        _atomic_write(os.path.join(out_dir, name), lambda p, c=cycle: write_wav(c, p))
        entries.append({"file": name, "seed": spec.seed})
    manifest = {
        "count": count,
        "sample_rate": int(cfg["rate"]),
        "cycle_seconds": float(cfg["seconds"]),
        "band": [float(cfg["band_low"]), float(cfg["band_high"])],
        "peak_hz": float(cfg["peak_hz"]),
        "peak_width_hz": float(cfg["peak_width_hz"]),
        "floor_fraction": float(cfg["floor_fraction"]),
        "inhale_fraction": float(cfg["inhale_fraction"]),
        "exhale_gain": float(cfg["exhale_gain"]),
        "cycles": entries,
    }
    _atomic_write(
        os.path.join(out_dir, "manifest.json"),
        lambda p: _write_text(p, json.dumps(manifest, indent=1, sort_keys=True)),
    )
    print(f"wrote {count} cycles and manifest.json under {out_dir}")
    return 0


def cmd_noise(cfg: _Settings) -> int:
    clean = load_wav(_require_file(cfg["input"]))
    kind = cfg["noise"]
    seed = int(cfg["seed"])
    if kind == "white":
        raw = gen_white(len(clean), seed)
    elif kind == "pink":
        raw = gen_pink(len(clean), float(cfg["alpha"]), seed)
    else:
        raise ValueError(f"noise must be white or pink, got {kind!r}")
    noisy, _ = mix_at_snr(clean, raw, float(cfg["snr"]))
    norm, affine = normalize(noisy)
    stored = Signal(wav_quantize(norm.samples), clean.sample_rate)
    _atomic_write(cfg["output"], lambda p: write_wav(stored, p))
    clean_ref = cfg.get("clean_ref")
    if clean_ref:
        reference = Signal(wav_quantize(affine.apply(clean.samples)), clean.sample_rate)
        _atomic_write(clean_ref, lambda p: write_wav(reference, p))
    print(f"wrote {cfg['output']} ({kind}, {float(cfg['snr'])} dB, seed {seed})")
    return 0


def cmd_decompose(cfg: _Settings) -> int:
    signal = load_wav(_require_file(cfg["input"]))
    stack = decompose(signal, _sift_config(cfg))
    _atomic_write(cfg["output"], lambda p: dump_imf_stack(stack, p))
    recon = stack.reconstruct()
    rel_err = float(
        np.linalg.norm(recon - signal.samples) / np.linalg.norm(signal.samples)
    )
    summary = {
        "n_imfs": stack.n_imfs,
        "columns": stack.n_imfs + 1,
        "reconstruction_rel_error": rel_err,
        "imf_means": stack.imf_means(),
    }
    summary_path = cfg.get("summary")
    if summary_path:
        _atomic_write(summary_path, lambda p: _write_text(p, json.dumps(summary, indent=1)))
    print(f"n_imfs={stack.n_imfs} reconstruction_rel_error={rel_err!r}")
    return 0


def _train_spec(cfg: _Settings, kinds: tuple[str, ...]) -> TrainSpec:
    return TrainSpec(
        structure=cfg["structure"],
        epochs=int(cfg["epochs"]),
        block_rows=int(cfg["block_rows"]),
        final_block_rows=int(cfg["final_block_rows"]),
        final_epochs=int(cfg["final_epochs"]),
        final_avg_epochs=int(cfg["final_avg_epochs"]),
        snr_set=_parse_snr_set(cfg["snr_set"]),
        noise_kinds=kinds,
        pink_alpha=float(cfg["pink_alpha"]),
        optimizer=cfg.get("optimizer", "lm"),
        seed=int(cfg["seed"]),
    )


def cmd_train(cfg: _Settings) -> int:
    cycles = _load_cycles(cfg["cycles"])
    n_train = cfg.get("n_train")
    n_train = max(1, round(len(cycles) * 3 / 4)) if n_train is None else int(n_train)
    kinds = _kinds(cfg["noise"])
    spec = _train_spec(cfg, kinds)
    train_snr = cfg.get("train_snr")
    model = bench_mod.train_bench_model(
        cycles[:n_train], spec, _sift_config(cfg), int(cfg["trial"]), kinds,
        None if train_snr is None else float(train_snr),
    )
    _atomic_write(cfg["output"], lambda p: save_model(model, p))
    print(f"trained {cfg['structure']} on {n_train} cycles -> {cfg['output']}")
    return 0


def cmd_denoise(cfg: _Settings) -> int:
    noisy = load_wav(_require_file(cfg["input"]))
    method = cfg["method"]
    sift_cfg = _sift_config(cfg)
    if method == "ann":
        model_path = cfg.get("model")
        if not model_path:
            raise ValueError("--model is required for --method ann")
        model = load_model(_require_file(model_path))
        out = denoise_ann(noisy, model, sift_cfg)
    elif method in ("custom", "hard", "soft"):
        params = CustomParams(alpha=float(cfg["alpha"]), gamma_ratio=float(cfg["gamma_ratio"]))
        out = denoise_emd_threshold(noisy, sift_cfg, method, params, float(cfg["c_const"]))
    else:
        raise ValueError(f"method must be ann, custom, hard or soft, got {method!r}")
    stored = Signal(wav_quantize(out.samples), out.sample_rate)
    _atomic_write(cfg["output"], lambda p: write_wav(stored, p))
    print(f"denoised {cfg['input']} with {method} -> {cfg['output']}")
    return 0


def cmd_eval(cfg: _Settings) -> int:
    desired = load_wav(_require_file(cfg["desired"]))
    candidate = load_wav(_require_file(cfg["candidate"]))
    snr = snr_db(desired, candidate)
    fit = fit_pct(desired, candidate)
    out_path = cfg.get("output")
    if out_path:
        payload = {"out_snr_db": snr, "fit_pct": fit}
        _atomic_write(out_path, lambda p: _write_text(p, json.dumps(payload, indent=1)))
    print(f"out_snr_db={snr!r} fit_pct={fit!r}")
    return 0


def cmd_bench(cfg: _Settings) -> int:
    cycles = _load_cycles(cfg["cycles"])
    out_dir = cfg["output"]
    os.makedirs(out_dir, exist_ok=True)
    n_train = cfg.get("n_train")
    spec = _train_spec(cfg, ("white", "pink"))
    sweep = bench_mod.SweepSpec(
        snr_min=float(cfg["sweep_min"]),
        snr_max=float(cfg["sweep_max"]),
        step=float(cfg["sweep_step"]),
        trials=int(cfg["trials"]),
    )
    reports = bench_mod.run_bench(
        cycles,
        _sift_config(cfg),
        spec,
        sweep,
        trials=int(cfg["trials"]),
        n_train=None if n_train is None else int(n_train),
        custom_params=CustomParams(alpha=float(cfg["alpha"]), gamma_ratio=float(cfg["gamma_ratio"])),
        c_const=float(cfg["c_const"]),
    )
    for name in ("table3", "table4", "sweep"):
        path = os.path.join(out_dir, f"{name}.csv")
        _atomic_write(path, lambda p, r=reports[name]: bench_mod.export_report(r, p, "csv"))
        print(bench_mod.format_report(reports[name], title=f"[{name}]"))
        print()
    print(f"wrote table3.csv, table4.csv, sweep.csv under {out_dir}")
    return 0


def cmd_spectrogram(cfg: _Settings) -> int:
    signal = load_wav(_require_file(cfg["input"]))
    grid = spectrogram(signal, int(cfg["window"]), int(cfg["hop"]))
    _atomic_write(cfg["output"], lambda p: save_spectrogram_txt(grid, p))
    print(f"wrote {grid.shape[0]} x {grid.shape[1]} spectrogram to {cfg['output']}")
    return 0


def _add(parser: argparse.ArgumentParser, command: str, flag: str, **kwargs) -> None:
    """Add a flag whose default lives in DEFAULTS (shown in help only)."""
    key = flag.lstrip("-").replace("-", "_")
    default = DEFAULTS.get(command, {}).get(key, DEFAULTS["global"].get(key))
    if default is not None and "help" in kwargs:
        kwargs["help"] = f"{kwargs['help']} (default: {default})"
    parser.add_argument(flag, default=None, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emdenoise",
        description="Mode-decomposition denoising of 1-D acoustic signals.",
    )
    parser.add_argument("--config", default=None, help="JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic breath-cycle WAV files")
    p.add_argument("--output", required=True, help="output directory")
    _add(p, "synth", "--count", type=int, help="number of cycles")
    _add(p, "synth", "--seconds", type=float, help="cycle length in seconds")
    _add(p, "synth", "--rate", type=int, help="sample rate in Hz")
    _add(p, "synth", "--band-low", type=float, help="carrier band low edge, Hz")
    _add(p, "synth", "--band-high", type=float, help="carrier band high edge, Hz")
    _add(p, "synth", "--peak-hz", type=float, help="carrier resonance center, Hz")
    _add(p, "synth", "--peak-width-hz", type=float, help="carrier resonance half-width, Hz")
    _add(p, "synth", "--floor-fraction", type=float, help="energy share of the broadband in-band floor")
    _add(p, "synth", "--inhale-fraction", type=float, help="inhale share of the cycle")
    _add(p, "synth", "--exhale-gain", type=float, help="exhale envelope gain")
    _add(p, "synth", "--seed", type=int, help="base seed; cycle i uses seed+i")

    p = sub.add_parser("noise", help="contaminate a WAV at an exact SNR")
    p.add_argument("--input", required=True, help="clean input WAV")
    p.add_argument("--output", required=True, help="noisy output WAV ([-1,1]-rescaled)")
    p.add_argument("--clean-ref", default=None, help="also write the clean reference in the same rescaled domain")
    _add(p, "noise", "--noise", choices=["white", "pink"], help="noise kind")
    _add(p, "noise", "--snr", type=float, help="target SNR in dB")
    _add(p, "noise", "--alpha", type=float, help="pink spectral exponent")
    _add(p, "noise", "--seed", type=int, help="noise seed")

    p = sub.add_parser("decompose", help="decompose a WAV into mode columns")
    p.add_argument("--input", required=True, help="input WAV")
    p.add_argument("--output", required=True, help="columnar text output (one column per mode + residue)")
    p.add_argument("--summary", default=None, help="optional JSON summary path")
    _add(p, "decompose", "--sd-threshold", type=float, help="sift stop threshold")
    _add(p, "decompose", "--max-sift-iters", type=int, help="max sift iterations per mode")
    _add(p, "decompose", "--max-imfs", type=int, help="max modes to extract")

    p = sub.add_parser("train", help="train a denoising network on clean cycles")
    p.add_argument("--cycles", required=True, help="directory of clean cycle WAVs")
    p.add_argument("--output", required=True, help="model file to write")
    _add(p, "train", "--structure", help="network structure id (ann1..ann9)")
    _add(p, "train", "--epochs", type=int, help="training epochs")
    _add(p, "train", "--noise", choices=["white", "pink", "white-pink"], help="training contamination")
    _add(p, "train", "--snr-set", help="comma-separated training SNRs in dB")
    _add(p, "train", "--train-snr", type=float, help="train at this single SNR (individual model)")
    _add(p, "train", "--trial", type=int, help="benchmark trial index to reproduce")
    _add(p, "train", "--n-train", type=int, help="training cycles (default: 3/4 of the set)")
    _add(p, "train", "--block-rows", type=int, help="rows per optimizer block")
    _add(p, "train", "--final-block-rows", type=int, help="rows per block in the final epochs")
    _add(p, "train", "--final-epochs", type=int, help="trailing epochs that use the large block")
    _add(p, "train", "--final-avg-epochs", type=int, help="trailing refinement epochs averaged into the returned weights")
    _add(p, "train", "--optimizer", choices=["lm", "gd"], help="training algorithm")
    _add(p, "train", "--pink-alpha", type=float, help="pink spectral exponent")
    _add(p, "train", "--sd-threshold", type=float, help="sift stop threshold")
    _add(p, "train", "--max-sift-iters", type=int, help="max sift iterations per mode")
    _add(p, "train", "--max-imfs", type=int, help="max modes to extract")
    _add(p, "train", "--seed", type=int, help="base seed of the whole run")

    p = sub.add_parser("denoise", help="denoise a noisy WAV")
    p.add_argument("--input", required=True, help="noisy input WAV")
    p.add_argument("--output", required=True, help="denoised output WAV (snapped to the 16-bit grid)")
    _add(p, "denoise", "--method", choices=["ann", "custom", "hard", "soft"], help="denoising method")
    p.add_argument("--model", default=None, help="model file (required for --method ann)")
    _add(p, "denoise", "--alpha", type=float, help="custom-threshold blend in [0,1]")
    _add(p, "denoise", "--gamma-ratio", type=float, help="kill region as a fraction of the threshold")
    _add(p, "denoise", "--c-const", type=float, help="threshold scale constant")
    _add(p, "denoise", "--sd-threshold", type=float, help="sift stop threshold")
    _add(p, "denoise", "--max-sift-iters", type=int, help="max sift iterations per mode")
    _add(p, "denoise", "--max-imfs", type=int, help="max modes to extract")

    p = sub.add_parser("eval", help="score a candidate against a desired signal")
    p.add_argument("--desired", required=True, help="reference WAV")
    p.add_argument("--candidate", required=True, help="candidate WAV")
    p.add_argument("--output", default=None, help="optional JSON metrics path")

    p = sub.add_parser("bench", help="run the full benchmark and write report CSVs")
    p.add_argument("--cycles", required=True, help="directory of clean cycle WAVs")
    p.add_argument("--output", required=True, help="output directory for report CSVs")
    _add(p, "bench", "--structure", help="network structure id (ann1..ann9)")
    _add(p, "bench", "--epochs", type=int, help="training epochs")
    _add(p, "bench", "--snr-set", help="comma-separated table SNRs in dB")
    _add(p, "bench", "--trials", type=int, help="seeds averaged per cell")
    _add(p, "bench", "--n-train", type=int, help="training cycles (default: 3/4 of the set)")
    _add(p, "bench", "--block-rows", type=int, help="rows per optimizer block")
    _add(p, "bench", "--final-block-rows", type=int, help="rows per block in the final epochs")
    _add(p, "bench", "--final-epochs", type=int, help="trailing epochs that use the large block")
    _add(p, "bench", "--final-avg-epochs", type=int, help="trailing refinement epochs averaged into the returned weights")
    _add(p, "bench", "--pink-alpha", type=float, help="pink spectral exponent")
    _add(p, "bench", "--alpha", type=float, help="custom-threshold blend in [0,1]")
    _add(p, "bench", "--gamma-ratio", type=float, help="kill region as a fraction of the threshold")
    _add(p, "bench", "--c-const", type=float, help="threshold scale constant")
    _add(p, "bench", "--sweep-min", type=float, help="sweep grid start, dB")
    _add(p, "bench", "--sweep-max", type=float, help="sweep grid end, dB")
    _add(p, "bench", "--sweep-step", type=float, help="sweep grid step, dB")
    _add(p, "bench", "--sd-threshold", type=float, help="sift stop threshold")
    _add(p, "bench", "--max-sift-iters", type=int, help="max sift iterations per mode")
    _add(p, "bench", "--max-imfs", type=int, help="max modes to extract")
    _add(p, "bench", "--seed", type=int, help="base seed of the whole run")

    p = sub.add_parser("spectrogram", help="export a spectrogram as a text matrix")
    p.add_argument("--input", required=True, help="input WAV")
    p.add_argument("--output", required=True, help="output text file, one frame per row")
    _add(p, "spectrogram", "--window", type=int, help="window length, samples")
    _add(p, "spectrogram", "--hop", type=int, help="hop length, samples")

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "noise": cmd_noise,
    "decompose": cmd_decompose,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "spectrogram": cmd_spectrogram,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("EMDENOISE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _Settings(args.command, args)
        return _COMMANDS[args.command](settings)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface a clean message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
