"""Acceptance suite: one test per criterion, each printing a PASS line
with its measured values once its assertions hold.

Criterion 9 runs the full desk-scale experiment (16 cycles of 5 s at
4 kHz, 3/4 train split, 3 trials) and takes the bulk of the suite's
runtime; everything else finishes in seconds.
"""

import math
import time

import numpy as np
import pytest

from emdenoise.bench import (
    SweepSpec,
    export_report,
    reference_for,
    run_bench,
)
from emdenoise.emd import (
    SiftConfig,
    count_extrema,
    decompose,
    zero_crossings,
)
from emdenoise.metrics import fit_pct, snr_db
from emdenoise.mlp import (
    SampleDataset,
    TrainSpec,
    build_mlp,
    forward_batch,
    load_model,
    mse,
    mse_gradient,
    save_model,
    train_lm,
)
from emdenoise.noise import gen_pink, gen_white, mix_at_snr
from emdenoise.signals import BreathSpec, Signal, synth_breath_cycle
from emdenoise.thresholding import (
    CustomParams,
    threshold_custom,
    threshold_hard,
    threshold_soft,
    estimate_e1,
    model_energies,
    universal_thresholds,
)


def _report(name, detail):
    print(f"\nPASS {name}: {detail}")


def _conservation_corpus():
    """100 mixed signals: tones, chirps, filtered noise, synthetic breaths."""
    rng = np.random.default_rng(2024)
    signals = []
    for i in range(100):
        n = int(rng.integers(1000, 16001))
        kind = i % 4
        t = np.arange(n) / 4000.0
        if kind == 0:
            f = rng.uniform(20, 1500)
            x = np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        elif kind == 1:
            f0, f1 = sorted(rng.uniform(20, 1800, size=2))
            x = np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * t[-1] + 1e-9)))
        elif kind == 2:
            spectrum = np.fft.rfft(rng.standard_normal(n))
            freqs = np.fft.rfftfreq(n, d=1 / 4000.0)
            lo, hi = sorted(rng.uniform(30, 1900, size=2))
            spectrum[(freqs < lo) | (freqs > hi + 50)] = 0.0
            x = np.fft.irfft(spectrum, n=n)
            if np.max(np.abs(x)) == 0:
                x = rng.standard_normal(n)
        else:
            seconds = n / 4000.0
            x = synth_breath_cycle(
                BreathSpec(cycle_seconds=seconds, seed=int(rng.integers(0, 2**31))), 4000
            ).samples
        signals.append(Signal(x, 4000))
    return signals


class TestCriterion1And2:
    @pytest.fixture(scope="class")
    def decomposed(self):
        signals = _conservation_corpus()
        start = time.perf_counter()
        stacks = [decompose(sig, SiftConfig()) for sig in signals]
        elapsed = time.perf_counter() - start
        return signals, stacks, elapsed

    def test_criterion_1_conservation(self, decomposed):
        signals, stacks, elapsed = decomposed
        worst = 0.0
        for sig, stack in zip(signals, stacks):
            err = np.linalg.norm(stack.reconstruct() - sig.samples) / np.linalg.norm(sig.samples)
            worst = max(worst, err)
            assert err < 1e-8
        assert elapsed < 60.0
        _report("criterion 1", f"100 decompositions, worst rel L2 error {worst:.2e}, {elapsed:.1f}s")

    def test_criterion_2_imf_validity_and_separation(self, decomposed):
        _, stacks, _ = decomposed
        checked = 0
        for stack in stacks:
            for imf in stack.imfs:
                assert abs(count_extrema(imf) - zero_crossings(imf)) <= 1
                checked += 1
        rate = 4000
        t = np.arange(rate) / rate
        hi, lo = np.sin(2 * np.pi * 400 * t), np.sin(2 * np.pi * 40 * t)
        stack = decompose(Signal(hi + lo, rate), SiftConfig())
        c_hi = np.corrcoef(stack.imfs[0], hi)[0, 1]
        c_lo = np.corrcoef(stack.imfs[1], lo)[0, 1]
        assert c_hi > 0.95 and c_lo > 0.95
        _report("criterion 2", f"{checked} modes valid; two-tone correlations {c_hi:.4f}/{c_lo:.4f}")


class TestCriterion3:
    def test_threshold_closed_forms(self):
        rng = np.random.default_rng(99)
        n = 10**5
        c = rng.normal(scale=2.0, size=n)
        taus = rng.uniform(0.0, 3.0, size=n)
        alphas = rng.uniform(0.0, 1.0, size=n)
        gammas = rng.uniform(0.05, 0.95, size=n)
        worst_soft = worst_custom = 0.0
        for i in range(n):
            ci, tau = c[i], taus[i]
            params = CustomParams(alpha=alphas[i], gamma_ratio=gammas[i])
            hard = threshold_hard(np.array([ci]), tau)[0]
            expected_hard = ci if abs(ci) > tau else 0.0
            assert hard == expected_hard  # 0 ulp
            soft = threshold_soft(np.array([ci]), tau)[0]
            if ci >= tau:
                expected_soft = ci - tau
            elif ci <= -tau:
                expected_soft = ci + tau
            else:
                expected_soft = 0.0
            worst_soft = max(worst_soft, abs(soft - expected_soft))
            custom = threshold_custom(np.array([ci]), tau, params)[0]
            gamma = params.gamma_ratio * tau
            sgn = math.copysign(1.0, ci) if ci != 0 else 0.0
            if abs(ci) >= tau:
                expected_custom = ci - sgn * ((1.0 - params.alpha) * tau)
            elif abs(ci) <= gamma:
                expected_custom = 0.0
            else:
                expected_custom = sgn * (
                    (abs(ci) - gamma) / (tau - gamma) * (tau - (1.0 - params.alpha) * tau)
                )
            worst_custom = max(worst_custom, abs(custom - expected_custom))
        assert worst_soft < 1e-15 and worst_custom < 1e-15
        # limiting behaviors on the keep region
        big = rng.normal(scale=3.0, size=1000)
        tau = 0.5
        keep = np.abs(big) >= tau
        soft_limit = threshold_custom(big, tau, CustomParams(alpha=0.0))
        np.testing.assert_array_equal(soft_limit[keep], threshold_soft(big, tau)[keep])
        identity_limit = threshold_custom(big, tau, CustomParams(alpha=1.0))
        np.testing.assert_array_equal(identity_limit[keep], big[keep])
        _report("criterion 3", f"1e5 tuples, soft dev {worst_soft:.1e}, custom dev {worst_custom:.1e}")


class TestCriterion4:
    def test_universal_threshold_model(self):
        e1 = estimate_e1(np.random.default_rng(42).standard_normal(10**5))
        assert 0.95 <= e1 <= 1.05
        energies = model_energies(1.37, 10)
        ratios = energies[2:] / energies[1:-1]
        np.testing.assert_allclose(ratios, 1.0 / 2.01, rtol=1e-15)
        tau = universal_thresholds(np.array([1.0]), math.e, 0.7)[0]
        assert abs(tau - 0.7 * math.sqrt(2.0)) < 1e-12
        _report("criterion 4", f"e1 {e1:.4f}; ratio dev {np.max(np.abs(ratios - 1/2.01)):.1e}; tau dev {abs(tau - 0.7*math.sqrt(2)):.1e}")


class TestCriterion5:
    def test_mix_calibration(self):
        rng = np.random.default_rng(7)
        clean = Signal(rng.normal(size=8192), 4000)
        worst = 0.0
        for target in range(-2, 21):
            noisy, _ = mix_at_snr(clean, rng.normal(size=8192), float(target))
            worst = max(worst, abs(snr_db(clean, noisy) - target))
            assert abs(snr_db(clean, noisy) - target) < 1e-6
        _report("criterion 5a", f"mix targets -2..20 dB, worst deviation {worst:.2e} dB")

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_pink_slope(self, alpha):
        length = 2**14
        acc = None
        for seed in range(100):
            psd = np.abs(np.fft.rfft(gen_pink(length, alpha, seed))) ** 2
            acc = psd if acc is None else acc + psd
        freqs = np.fft.rfftfreq(length)[1:]
        slope, _ = np.polyfit(np.log(freqs), np.log(acc[1:] / 100), 1)
        assert abs(slope + alpha) <= 0.15
        _report("criterion 5b", f"alpha={alpha}: fitted slope {slope:.3f}")


class TestCriterion6:
    @pytest.mark.parametrize("sizes", [(13, 5, 1), (13, 25, 20, 1)])
    def test_gradient_against_finite_differences(self, sizes):
        rng = np.random.default_rng(11)
        model = build_mlp(sizes, seed=5)
        rows = rng.normal(size=(20, 13))
        targets = rng.normal(size=20)
        _, grad = mse_gradient(model, rows, targets)
        theta = np.concatenate(
            [np.concatenate([w.ravel(), b]) for w, b in zip(model.weights, model.biases)]
        )

        def with_theta(vec):
            clone = model.clone()
            pos = 0
            for w, b in zip(clone.weights, clone.biases):
                w[:] = vec[pos : pos + w.size].reshape(w.shape)
                pos += w.size
                b[:] = vec[pos : pos + b.size]
                pos += b.size
            return clone

        step = 1e-6
        numeric = np.empty_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += step
            down[i] -= step
            numeric[i] = (
                mse(with_theta(up), rows, targets) - mse(with_theta(down), rows, targets)
            ) / (2 * step)
        rel = np.max(np.abs(grad - numeric) / np.maximum(np.abs(numeric), 1e-8))
        assert rel < 1e-4
        _report("criterion 6", f"{sizes}: max relative gradient error {rel:.2e}")


class TestCriterion7:
    def test_lm_reaches_sum_map(self):
        rng = np.random.default_rng(13)
        rows = rng.uniform(-0.3, 0.3, size=(2000, 13))
        data = SampleDataset(
            rows,
            rows.sum(axis=1),
            np.zeros(2000, dtype=np.int32),
            np.full(2000, "white", dtype="U5"),
            np.zeros(2000),
        )
        spec = TrainSpec(structure="ann5", epochs=200, seed=0)
        _, history = train_lm(build_mlp("ann5", seed=0), data, spec)
        assert history[-1] < 1e-6
        assert all(b <= a * (1 + 1e-12) for a, b in zip(history, history[1:]))
        _report("criterion 7", f"final MSE {history[-1]:.2e} after 200 epochs, history non-increasing")


class TestCriterion8:
    def test_metric_closed_cases(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=2048)
        e = rng.normal(size=2048)
        e0 = e * math.sqrt(np.sum(x**2) / np.sum(e**2))
        assert snr_db(x, x + e0) == pytest.approx(0.0, abs=1e-12)
        e20 = e * math.sqrt(np.sum(x**2) / (100.0 * np.sum(e**2)))
        assert snr_db(x, x + e20) == pytest.approx(20.0, abs=1e-12)
        assert fit_pct(x, x.copy()) == 100.0
        assert fit_pct(x, np.full_like(x, np.mean(x))) == pytest.approx(0.0, abs=1e-12)
        _report("criterion 8", "0 dB, 20 dB, identity and constant-mean cases exact")


class TestCriterion9:
    """Desk-scale end-to-end run: 16 cycles of 5 s at 4 kHz, 3/4 train
    split, 3 trials, full table and sweep protocols."""

    @pytest.fixture(scope="class")
    def desk(self):
        cycles = [synth_breath_cycle(BreathSpec(seed=100 + i), 4000) for i in range(16)]
        spec = TrainSpec(seed=0)
        sweep = SweepSpec(trials=3)
        start = time.perf_counter()
        reports = run_bench(cycles, SiftConfig(), spec, sweep, trials=3)
        elapsed = time.perf_counter() - start
        print(f"\n[criterion 9] desk-scale bench: {elapsed/60:.1f} min")
        return reports, elapsed

    def test_criterion_9a_combined_improves_everywhere(self, desk):
        reports, _ = desk
        lines = []
        for row in reports["table3"]:
            if row.method != "ann-combined":
                continue
            gain = row.out_snr_db - row.test_snr_db
            lines.append(f"{row.noise_kind} {row.test_snr_db:>4.0f} dB -> {row.out_snr_db:6.2f} (gain {gain:+.2f})")
            assert row.out_snr_db > row.test_snr_db, (
                f"no improvement at {row.noise_kind} {row.test_snr_db} dB: {row.out_snr_db:.2f}"
            )
        _report("criterion 9a", "combined model improves SNR at every cell:\n  " + "\n  ".join(lines))

    def test_criterion_9b_gain_at_zero(self, desk):
        reports, _ = desk
        for kind in ("white", "pink"):
            row = reports["table3"].cell("ann-combined", kind, 0.0)
            assert row.out_snr_db - row.test_snr_db >= 3.0
        white = reports["table3"].cell("ann-combined", "white", 0.0).out_snr_db
        pink = reports["table3"].cell("ann-combined", "pink", 0.0).out_snr_db
        _report("criterion 9b", f"0 dB gains: white {white:+.2f}, pink {pink:+.2f} (>= 3 required)")

    def test_criterion_9c_network_beats_custom(self, desk):
        reports, _ = desk
        for kind in ("white", "pink"):
            for snr in (0.0, 5.0, 10.0, 15.0, 20.0):
                ann = reports["table4"].cell("emd-ann", kind, snr)
                custom = reports["table4"].cell("emd-custom", kind, snr)
                assert ann.out_snr_db >= custom.out_snr_db, (
                    f"custom wins at {kind} {snr} dB: {ann.out_snr_db:.2f} < {custom.out_snr_db:.2f}"
                )
        w_ann = reports["table4"].cell("emd-ann", "white", 0.0).out_snr_db
        w_cus = reports["table4"].cell("emd-custom", "white", 0.0).out_snr_db
        p_ann = reports["table4"].cell("emd-ann", "pink", 0.0).out_snr_db
        p_cus = reports["table4"].cell("emd-custom", "pink", 0.0).out_snr_db
        _report(
            "criterion 9c",
            f"network >= custom in all 20 cells; at 0 dB: white {w_ann:.2f} vs {w_cus:.2f} "
            f"(reference 9.41 vs 5.89), pink {p_ann:.2f} vs {p_cus:.2f} (reference 8.23 vs 4.31)",
        )

    def test_criterion_9d_sweep_trends(self, desk):
        reports, _ = desk
        sweep = reports["sweep"]
        methods = sorted({(row.method, row.noise_kind) for row in sweep})
        for method, kind in methods:
            series = sorted(
                (r for r in sweep if r.method == method and r.noise_kind == kind),
                key=lambda r: r.test_snr_db,
            )
            for prev, nxt in zip(series, series[1:]):
                assert nxt.out_snr_db >= prev.out_snr_db - 1.0, (
                    f"{method}/{kind}: out drops {prev.out_snr_db:.2f} -> {nxt.out_snr_db:.2f} "
                    f"at {nxt.test_snr_db} dB"
                )
            low_gain = series[0].out_snr_db - series[0].test_snr_db
            high_gain = series[-1].out_snr_db - series[-1].test_snr_db
            assert low_gain > high_gain
        _report("criterion 9d", f"{len(methods)} sweep series monotone within 1 dB/step; low-SNR gain exceeds high-SNR gain")

    def test_criterion_9_runtime(self, desk):
        _, elapsed = desk
        assert elapsed < 1800.0
        _report("criterion 9 runtime", f"{elapsed/60:.1f} min (target < 30 min)")


class TestCriterion10:
    def test_bench_determinism_and_model_round_trip(self, tmp_path):
        cycles = [
            synth_breath_cycle(BreathSpec(seed=70 + i, cycle_seconds=1.0, band_high=450.0), 1000)
            for i in range(4)
        ]
        spec = TrainSpec(structure=(13, 6, 1), epochs=3, snr_set=(0.0, 5.0), block_rows=512, seed=3)
        sweep = SweepSpec(snr_min=0.0, snr_max=2.0, step=1.0, trials=1, models=(("white", "white"),))
        files = {}
        for run_idx in ("a", "b"):
            reports = run_bench(cycles, SiftConfig(), spec, sweep, trials=1)
            for name, report in reports.items():
                path = tmp_path / f"{name}_{run_idx}.csv"
                export_report(report, path, "csv")
                files.setdefault(name, []).append(path.read_bytes())
        for name, (first, second) in files.items():
            assert first == second, f"{name} differs between reruns"
        model = build_mlp("ann5", seed=123)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        rows = np.random.default_rng(5).normal(size=(64, 13))
        np.testing.assert_array_equal(forward_batch(model, rows), forward_batch(loaded, rows))
        _report("criterion 10", "byte-identical bench reruns; bit-identical model round trip")
