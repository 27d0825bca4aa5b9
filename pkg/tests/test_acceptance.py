"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import json
import time
from itertools import permutations as iter_permutations
from pathlib import Path

import numpy as np
import pytest

import pilot_suite
from sepfront import audio_io, cli
from sepfront.beamform import mvdr_weights, separate_mvdr, spatial_covariance
from sepfront.dsp import MultichannelWaveform, Spectrogram, StftConfig, istft, stft
from sepfront.masks import MaskSet
from sepfront.metrics import (
    LossWeights,
    MetricConfig,
    ci_sdr,
    pit_assign,
    si_sdr,
    waveform_spectral_l1,
)
from sepfront.simulate import render_scene


def _report(number, description, ok=True):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {number}: {status} - {description}")
    assert ok, f"criterion {number} failed: {description}"


def _covariance_from(matrices):
    from sepfront.beamform import SpatialCovarianceSet

    matrices = np.asarray(matrices, dtype=complex)
    return SpatialCovarianceSet(
        matrices=matrices,
        mass=np.ones(matrices.shape[0]),
        zero_mass=np.zeros(matrices.shape[0], dtype=bool),
    )


def test_criterion_1_stft_round_trip():
    rng = np.random.default_rng(101)
    configs = [StftConfig(512, 128), StftConfig(512, 256)]
    started = time.monotonic()
    worst = 0.0
    for _ in range(200):
        length = rng.integers(8000, 48001)
        x = rng.standard_normal((1, length))
        wf = MultichannelWaveform(x, 16000)
        for config in configs:
            y = istft(stft(wf, config))
            rel = np.abs(y.samples - x).max() / max(1.0, np.abs(x).max())
            worst = max(worst, rel)
            assert rel < 1e-10
    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    _report(1, f"STFT round trip, 200 signals x 2 configs: max rel err "
               f"{worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_covariance_estimator():
    rng = np.random.default_rng(202)
    config = StftConfig(8, 4, fft_size=8)
    worst_herm = 0.0
    worst_eig = 0.0
    for i in range(1000):
        m = int(rng.integers(1, 5))
        t = int(rng.integers(1, 7))
        bins = rng.standard_normal((m, t, config.num_bins)) + 1j * rng.standard_normal(
            (m, t, config.num_bins)
        )
        spec = Spectrogram(bins, config, (t - 1) * config.hop)
        mask = rng.uniform(0.0, 1.0, (t, config.num_bins))
        cov = spatial_covariance(spec, mask)
        for f in range(config.num_bins):
            v = cov.matrices[f]
            scale = np.abs(v).max()
            if scale > 0:
                assert np.abs(v - v.conj().T).max() <= 1e-12 * scale
            trace = np.real(np.trace(v))
            if trace > 0:
                assert np.linalg.eigvalsh(v).min() >= -1e-9 * trace / m
                worst_eig = max(worst_eig, -np.linalg.eigvalsh(v).min() / (trace / m))
            if scale > 0:
                worst_herm = max(worst_herm, np.abs(v - v.conj().T).max() / scale)
        # direct-summation oracle on small instances
        if m <= 3 and t <= 5:
            for f in range(config.num_bins):
                total = np.zeros((m, m), dtype=complex)
                for tt in range(t):
                    z = bins[:, tt, f]
                    total += mask[tt, f] * np.outer(z, z.conj())
                mass = mask[:, f].sum()
                expected = total / mass if mass > 0 else total * 0.0
                scale = max(np.abs(expected).max(), 1.0)
                assert np.abs(cov.matrices[f] - expected).max() <= 1e-12 * scale
    _report(2, f"covariance estimator, 1000 instances: Hermitian drift "
               f"{worst_herm:.1e}, eig deficit {worst_eig:.1e}")


def test_criterion_3_mvdr_distortionless():
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(500):
        m = int(rng.choice([2, 4, 8]))
        d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        sigma2 = rng.uniform(0.1, 10.0)
        target = sigma2 * np.outer(d, d.conj())
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        interference = a @ a.conj().T + 0.1 * np.eye(m)
        ref = int(rng.integers(0, m))
        weights = mvdr_weights(
            _covariance_from([target]), _covariance_from([interference]), ref
        )
        response = weights.weights[0].conj() @ d
        err = abs(response - d[ref]) / abs(d[ref])
        worst = max(worst, err)
        assert err < 1e-8
        # target scaling leaves weights unchanged to machine precision
        scaled = mvdr_weights(
            _covariance_from([123.456 * target]), _covariance_from([interference]), ref
        )
        np.testing.assert_allclose(scaled.weights, weights.weights, rtol=1e-12, atol=1e-15)
    _report(3, f"MVDR distortionless, 500 rank-1 instances: max rel err {worst:.1e}")


def test_criterion_4_end_to_end_mvdr_gain():
    with open(pilot_suite.PILOT_PATH, "r", encoding="utf-8") as f:
        pilot = json.load(f)
    started = time.monotonic()
    improvements = pilot_suite.run_pilot()
    elapsed = time.monotonic() - started
    fraction = float(np.mean(improvements > 0.0))
    mean = float(improvements.mean())
    assert fraction >= 0.95
    assert abs(mean - pilot["mean_improvement_db"]) <= 0.5
    assert elapsed < 300.0
    _report(4, f"oracle-IRM MVDR on 100 scenes: {100 * fraction:.0f}% pairs improved, "
               f"mean gain {mean:.2f} dB (pilot {pilot['mean_improvement_db']:.2f}), "
               f"{elapsed:.0f}s")


def test_criterion_5_ci_sdr_correctness():
    rng = np.random.default_rng(505)
    # (a) delayed-and-scaled reference at cap
    ref = rng.standard_normal(6000)
    est = np.zeros(6000)
    est[100:] = 0.5 * ref[:-100]
    assert ci_sdr(est, ref, MetricConfig(ci_sdr_taps=512)) == 100.0
    # (b) taps=1 equals optimally scaled SDR
    worst_b = 0.0
    for _ in range(20):
        e = rng.standard_normal(2000)
        r = rng.standard_normal(2000)
        diff = abs(ci_sdr(e, r, MetricConfig(ci_sdr_taps=1)) - si_sdr(e, r))
        worst_b = max(worst_b, diff)
        assert diff < 1e-9
    # (c) 100 random pairs at taps=16 vs dense least-squares oracle
    worst_c = 0.0
    for _ in range(100):
        r = rng.standard_normal(1200)
        e = np.convolve(r, rng.standard_normal(8))[:1200] + 0.2 * rng.standard_normal(1200)
        ours = ci_sdr(e, r, MetricConfig(ci_sdr_taps=16))
        cols = np.zeros((1200, 16))
        for i in range(16):
            cols[i:, i] = r[: 1200 - i]
        h, *_ = np.linalg.lstsq(cols, e, rcond=None)
        fitted = cols @ h
        oracle = 10.0 * np.log10(np.sum(fitted ** 2) / np.sum((e - fitted) ** 2))
        diff = abs(ours - oracle)
        worst_c = max(worst_c, diff)
        assert diff < 1e-8
    _report(5, f"CI-SDR: delayed/scaled at cap, taps=1 vs SDR {worst_b:.1e} dB, "
               f"oracle gap {worst_c:.1e} dB")


def test_criterion_6_pit_optimality():
    rng = np.random.default_rng(606)
    checked = 0
    for k in range(2, 7):
        perms = list(iter_permutations(range(k)))
        for _ in range(2000):
            cost = rng.standard_normal((k, k))
            result = pit_assign(cost)
            best = min(sum(cost[i, p[i]] for i in range(k)) for p in perms)
            assert abs(result.total_cost - best) < 1e-12
            checked += 1
    # constructed ties break lexicographically
    assert pit_assign(np.zeros((4, 4))).permutation == (0, 1, 2, 3)
    tie = np.ones((3, 3))
    tie[0, 2] = tie[1, 1] = tie[2, 0] = 0.0  # anti-diagonal optimum
    tie[0, 0] = tie[1, 1] = tie[2, 2] = 0.0  # diagonal equally optimal
    assert pit_assign(tie).permutation == (0, 1, 2)
    _report(6, f"PIT optimality on {checked} matrices (K=2..6), lexicographic ties")


def test_criterion_7_composite_loss():
    rng = np.random.default_rng(707)
    config = StftConfig(8, 4, fft_size=8)
    x = rng.standard_normal(16)
    assert waveform_spectral_l1(x, x, config) == 0.0

    est = x + 0.125
    # independent hand computation: direct windowed DFT per frame
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(8) / 8))

    def direct_mags(signal):
        padded = np.concatenate([np.zeros(4), signal, np.zeros(12)])
        frames = 1 + len(signal) // 4
        mags = []
        for t in range(frames):
            frame = window * padded[4 * t: 4 * t + 8]
            for k in range(5):
                mags.append(abs(sum(
                    frame[n] * np.exp(-2j * np.pi * k * n / 8) for n in range(8)
                )))
        return np.array(mags)

    wave_term = sum(abs(a - b) for a, b in zip(est, x)) / 16
    mag_term = np.mean(np.abs(direct_mags(est) - direct_mags(x)))
    expected = 0.99 * wave_term + 0.01 * mag_term
    actual = waveform_spectral_l1(est, x, config, LossWeights(0.99))
    assert abs(actual - expected) < 1e-12
    _report(7, f"composite 0.99/0.01 loss: hand-computed gap {abs(actual - expected):.1e}")


def test_criterion_8_mixture_decomposition():
    worst_snr = 0.0
    for index in range(30):
        spec = pilot_suite.make_scene(index)
        scene = render_scene(spec)
        recomposed = np.zeros_like(scene.mixture.samples)
        for image in scene.source_images:
            recomposed = recomposed + image.samples
        recomposed = recomposed + scene.noise_image.samples
        assert np.array_equal(recomposed, scene.mixture.samples)
        ref = spec.reference_mic
        summed = sum(img.samples[ref] for img in scene.source_images)
        measured = 10.0 * np.log10(
            np.mean(summed ** 2) / np.mean(scene.noise_image.samples[ref] ** 2)
        )
        worst_snr = max(worst_snr, abs(measured - spec.noise.snr_db))
        assert worst_snr < 1e-9
    _report(8, f"exact mixture decomposition on 30 scenes, SNR err {worst_snr:.1e} dB")


@pytest.fixture(scope="module")
def cli_suite(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli_suite")
    manifest = pilot_suite.write_cli_suite(base)
    return base, manifest


def _normalized_reports(out_dir):
    """Report bytes with the timing fields stripped."""
    records = []
    with open(Path(out_dir) / "report.jsonl", "r", encoding="utf-8") as f:
        for line in f:
            record = json.loads(line)
            record.pop("timing_s", None)
            records.append(json.dumps(record, sort_keys=True))
    with open(Path(out_dir) / "report.json", "r", encoding="utf-8") as f:
        summary = f.read()
    return "\n".join(records), summary


def test_criterion_9_cli_determinism_and_equivalence(cli_suite):
    base, manifest = cli_suite
    out_dir = base / "out"
    config = cli.load_config(None, {
        "command": "run-all",
        "scene_manifest": str(manifest),
        "output_dir": str(out_dir),
        "seed": 0,
    })
    cli.run(config)
    first_records, first_summary = _normalized_reports(out_dir)
    first_ests = {
        p.relative_to(out_dir): p.read_bytes()
        for p in sorted(out_dir.glob("scenes/*/est_*.wav"))
    }
    cli.run(config)
    second_records, second_summary = _normalized_reports(out_dir)
    assert first_records == second_records
    assert first_summary == second_summary
    second_ests = {
        p.relative_to(out_dir): p.read_bytes()
        for p in sorted(out_dir.glob("scenes/*/est_*.wav"))
    }
    assert first_ests == second_ests

    # CLI output equals the library-API composition bit-exactly
    stft_config = StftConfig(512, 128)
    for scene_id in ("scene_0000", "scene_0042", "scene_0099"):
        scene_dir = out_dir / "scenes" / scene_id
        mixture = audio_io.read_wav(scene_dir / "mixture.wav")
        mask_set = cli.load_scene_masks(scene_dir, config, stft_config)
        estimates, _ = separate_mvdr(mixture, mask_set, stft_config, 0)
        for k, est in enumerate(estimates, start=1):
            written = audio_io.read_wav(scene_dir / f"est_{k}.wav").samples[0]
            assert np.array_equal(written, est.samples[0].astype(np.float32))
    _report(9, "CLI run-all deterministic across repeats; outputs match library API")
