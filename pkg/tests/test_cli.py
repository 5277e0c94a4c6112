"""Command-line interface tests: every subcommand, config precedence,
exit codes and reproducibility."""

import json
import os

import numpy as np
import pytest

from emdenoise.cli import build_parser, main
from emdenoise.metrics import fit_pct, snr_db
from emdenoise.mlp import load_model
from emdenoise.signals import load_wav


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def cycles_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cycles")
    code = run(
        "synth", "--output", str(path), "--count", "4", "--seconds", "1.0",
        "--rate", "1000", "--band-high", "450", "--seed", "5",
    )
    assert code == 0
    return path


class TestSynth:
    def test_writes_files_and_manifest(self, tmp_path):
        out = tmp_path / "corpus"
        assert run("synth", "--output", str(out), "--count", "3", "--seconds", "0.5",
                   "--rate", "1000", "--band-high", "450", "--seed", "1") == 0
        wavs = sorted(p.name for p in out.glob("*.wav"))
        assert wavs == ["cycle_000.wav", "cycle_001.wav", "cycle_002.wav"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["count"] == 3
        assert [c["seed"] for c in manifest["cycles"]] == [1, 2, 3]

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("synth", "--output", str(out), "--count", "2", "--seconds", "0.5",
                       "--rate", "1000", "--band-high", "450", "--seed", "3") == 0
        for name in ("cycle_000.wav", "cycle_001.wav", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_output_reloads_as_signal(self, tmp_path):
        out = tmp_path / "c"
        run("synth", "--output", str(out), "--count", "1", "--seconds", "0.5",
            "--rate", "1000", "--band-high", "450", "--seed", "2")
        sig = load_wav(out / "cycle_000.wav")
        assert sig.sample_rate == 1000
        assert len(sig) == 500


class TestNoise:
    def test_contaminates_and_writes_reference(self, cycles_dir, tmp_path):
        noisy = tmp_path / "noisy.wav"
        ref = tmp_path / "ref.wav"
        code = run("noise", "--input", str(cycles_dir / "cycle_000.wav"),
                   "--output", str(noisy), "--clean-ref", str(ref),
                   "--noise", "white", "--snr", "3.0", "--seed", "9")
        assert code == 0
        y = load_wav(noisy)
        x = load_wav(ref)
        assert len(y) == len(x)
        # mixture spans the full range after rescaling
        assert np.min(y.samples) == pytest.approx(-1.0, abs=2 / 32768)
        assert np.max(y.samples) == pytest.approx(1.0, abs=2 / 32768)

    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = run("noise", "--input", str(tmp_path / "nope.wav"),
                   "--output", str(tmp_path / "o.wav"))
        assert code == 2
        assert "nope.wav" in capsys.readouterr().err


class TestDecompose:
    def test_columns_and_summary(self, cycles_dir, tmp_path):
        out = tmp_path / "imfs.txt"
        summary = tmp_path / "summary.json"
        code = run("decompose", "--input", str(cycles_dir / "cycle_000.wav"),
                   "--output", str(out), "--summary", str(summary))
        assert code == 0
        table = np.loadtxt(out)
        info = json.loads(summary.read_text())
        assert table.shape[1] == info["n_imfs"] + 1
        assert info["columns"] == info["n_imfs"] + 1
        assert info["reconstruction_rel_error"] < 1e-8
        assert len(info["imf_means"]) == info["n_imfs"]

    def test_monotone_input_reports_zero_modes(self, tmp_path, capsys):
        from emdenoise.signals import Signal, write_wav

        ramp = tmp_path / "ramp.wav"
        write_wav(Signal(np.linspace(-0.9, 0.9, 400), 1000), ramp)
        code = run("decompose", "--input", str(ramp), "--output", str(tmp_path / "o.txt"))
        assert code == 0
        assert "n_imfs=0" in capsys.readouterr().out


class TestDenoiseEval:
    def test_threshold_methods_write_output(self, cycles_dir, tmp_path):
        noisy = tmp_path / "noisy.wav"
        ref = tmp_path / "ref.wav"
        run("noise", "--input", str(cycles_dir / "cycle_000.wav"), "--output", str(noisy),
            "--clean-ref", str(ref), "--noise", "white", "--snr", "0.0", "--seed", "1")
        for method in ("custom", "hard", "soft"):
            out = tmp_path / f"out_{method}.wav"
            assert run("denoise", "--input", str(noisy), "--output", str(out),
                       "--method", method) == 0
            assert out.exists()

    def test_eval_prints_metrics(self, cycles_dir, tmp_path, capsys):
        noisy = tmp_path / "noisy.wav"
        ref = tmp_path / "ref.wav"
        run("noise", "--input", str(cycles_dir / "cycle_000.wav"), "--output", str(noisy),
            "--clean-ref", str(ref), "--noise", "white", "--snr", "5.0", "--seed", "2")
        capsys.readouterr()
        metrics_path = tmp_path / "metrics.json"
        assert run("eval", "--desired", str(ref), "--candidate", str(noisy),
                   "--output", str(metrics_path)) == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("out_snr_db=")
        payload = json.loads(metrics_path.read_text())
        x, y = load_wav(ref), load_wav(noisy)
        assert payload["out_snr_db"] == snr_db(x, y)
        assert payload["fit_pct"] == fit_pct(x, y)

    def test_ann_requires_model(self, cycles_dir, tmp_path, capsys):
        code = run("denoise", "--input", str(cycles_dir / "cycle_000.wav"),
                   "--output", str(tmp_path / "o.wav"), "--method", "ann")
        assert code == 1
        assert "--model" in capsys.readouterr().err


class TestTrain:
    def test_trains_and_saves_model(self, cycles_dir, tmp_path):
        model_path = tmp_path / "model.json"
        code = run("train", "--cycles", str(cycles_dir), "--output", str(model_path),
                   "--structure", "ann1", "--epochs", "2", "--snr-set", "0",
                   "--seed", "3", "--block-rows", "256")
        assert code == 0
        model = load_model(model_path)
        assert model.layer_sizes == (13, 35, 1)
        assert model.epochs_trained == 2

    def test_ann_denoise_round_trip(self, cycles_dir, tmp_path):
        model_path = tmp_path / "model.json"
        run("train", "--cycles", str(cycles_dir), "--output", str(model_path),
            "--structure", "ann1", "--epochs", "2", "--snr-set", "0",
            "--seed", "3", "--block-rows", "256")
        noisy = tmp_path / "noisy.wav"
        run("noise", "--input", str(cycles_dir / "cycle_003.wav"), "--output", str(noisy),
            "--noise", "white", "--snr", "0.0", "--seed", "4")
        out = tmp_path / "denoised.wav"
        assert run("denoise", "--input", str(noisy), "--output", str(out),
                   "--method", "ann", "--model", str(model_path)) == 0
        assert len(load_wav(out)) == len(load_wav(noisy))


class TestSpectrogram:
    def test_writes_grid(self, cycles_dir, tmp_path):
        out = tmp_path / "spec.txt"
        assert run("spectrogram", "--input", str(cycles_dir / "cycle_000.wav"),
                   "--output", str(out), "--window", "128", "--hop", "64") == 0
        grid = np.loadtxt(out)
        assert grid.shape == ((1000 - 128) // 64 + 1, 65)


class TestConfigPrecedence:
    def test_file_overrides_default_and_flag_overrides_file(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"synth": {"count": 2, "seconds": 0.5, "rate": 1000, "band_high": 450.0}}))
        out_a = tmp_path / "a"
        assert run("--config", str(config), "synth", "--output", str(out_a), "--seed", "1") == 0
        assert len(list(out_a.glob("*.wav"))) == 2
        out_b = tmp_path / "b"
        assert run("--config", str(config), "synth", "--output", str(out_b),
                   "--count", "3", "--seed", "1") == 0
        assert len(list(out_b.glob("*.wav"))) == 3

    def test_global_seed_from_config(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "global": {"seed": 8},
            "synth": {"count": 1, "seconds": 0.5, "rate": 1000, "band_high": 450.0},
        }))
        out = tmp_path / "c"
        assert run("--config", str(config), "synth", "--output", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["cycles"][0]["seed"] == 8

    def test_missing_config_exits_2(self, tmp_path):
        assert run("--config", str(tmp_path / "absent.json"), "synth",
                   "--output", str(tmp_path / "x")) == 2


class TestHelp:
    @pytest.mark.parametrize(
        "command",
        ["synth", "noise", "decompose", "train", "denoise", "eval", "bench", "spectrogram"],
    )
    def test_help_lists_defaults(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        assert "default:" in text or command == "eval"


def test_failed_command_leaves_no_output(tmp_path):
    out = tmp_path / "never.wav"
    code = run("denoise", "--input", str(tmp_path / "missing.wav"),
               "--output", str(out), "--method", "hard")
    assert code == 2
    assert not out.exists()


def test_pipeline_matches_bench_cell_exactly(cycles_dir, tmp_path):
    """train -> noise -> denoise -> eval through files reproduces the
    corresponding benchmark cell bit for bit."""
    from emdenoise.bench import mixture_seed

    seed, trial = 2, 0
    common = ["--epochs", "2", "--snr-set", "0,5", "--block-rows", "256",
              "--structure", "ann1", "--seed", str(seed)]
    reports = tmp_path / "reports"
    assert run("bench", "--cycles", str(cycles_dir), "--output", str(reports),
               "--trials", "1", "--n-train", "3",
               "--sweep-min", "0", "--sweep-max", "0", "--sweep-step", "1", *common) == 0
    rows = (reports / "table3.csv").read_text().strip().splitlines()
    cell = None
    for line in rows[1:]:
        fields = line.split(",")
        if fields[0] == "ann-combined" and fields[1] == "white" and float(fields[3]) == 0.0:
            cell = float(fields[4])
    assert cell is not None

    model = tmp_path / "model.json"
    assert run("train", "--cycles", str(cycles_dir), "--output", str(model),
               "--noise", "white", "--trial", str(trial), "--n-train", "3", *common) == 0
    # the held-out cycle is index 3 overall, test-cycle index 0
    noise_seed = mixture_seed(seed, trial, "white", 0.0, 0)
    noisy, ref, out = tmp_path / "noisy.wav", tmp_path / "ref.wav", tmp_path / "out.wav"
    assert run("noise", "--input", str(cycles_dir / "cycle_003.wav"), "--output", str(noisy),
               "--clean-ref", str(ref), "--noise", "white", "--snr", "0.0",
               "--seed", str(noise_seed)) == 0
    assert run("denoise", "--input", str(noisy), "--output", str(out),
               "--method", "ann", "--model", str(model)) == 0
    metrics_path = tmp_path / "metrics.json"
    assert run("eval", "--desired", str(ref), "--candidate", str(out),
               "--output", str(metrics_path)) == 0
    measured = json.loads(metrics_path.read_text())["out_snr_db"]
    assert measured == cell


def test_bench_writes_three_csvs(cycles_dir, tmp_path):
    out = tmp_path / "reports"
    code = run(
        "bench", "--cycles", str(cycles_dir), "--output", str(out),
        "--epochs", "2", "--snr-set", "0,5", "--trials", "1",
        "--sweep-min", "0", "--sweep-max", "1", "--sweep-step", "1",
        "--block-rows", "256", "--structure", "ann1", "--seed", "2",
    )
    assert code == 0
    for name in ("table3.csv", "table4.csv", "sweep.csv"):
        text = (out / name).read_text()
        assert text.startswith("method,noise_kind,train_snr_set")
        assert len(text.strip().splitlines()) > 1
