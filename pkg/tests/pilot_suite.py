"""Seeded 100-scene pilot suite: 8-channel anechoic 2-speaker scenes.

Running this module regenerates tests/data/pilot_mvdr.json, the committed
record of the oracle-IRM MVDR pilot that the acceptance suite regression
checks against.
"""

import json
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from sepfront import (
    MetricConfig,
    NoiseSpec,
    SceneSpec,
    SourceSpec,
    StftConfig,
    evaluate_separation,
    input_sdr,
    linear_array,
    render_scene,
    si_sdr,
)
from sepfront.beamform import separate_mvdr
from sepfront.dsp import stft
from sepfront.masks import oracle_mask

NUM_SCENES = 100
NUM_MICS = 8
SAMPLE_RATE = 16000
DURATION_S = 4.0
MIN_SEPARATION_DEG = 30.0

PILOT_PATH = Path(__file__).parent / "data" / "pilot_mvdr.json"


def _speech_like(rng, num_samples):
    noise = rng.standard_normal(num_samples)
    colored = lfilter([0.1], [1.0, -0.9], noise)
    rate = rng.uniform(1.0, 4.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    envelope = 0.5 + 0.5 * np.sin(
        2.0 * np.pi * rate * np.arange(num_samples) / SAMPLE_RATE + phase
    )
    return colored * envelope


def make_scene(index):
    """Deterministic 2-speaker scene with directions at least 30 degrees apart."""
    rng = np.random.default_rng(1000 + index)
    num_samples = int(DURATION_S * SAMPLE_RATE)
    az1 = rng.uniform(0.0, 2.0 * np.pi)
    gap = np.deg2rad(rng.uniform(MIN_SEPARATION_DEG, 180.0 - MIN_SEPARATION_DEG))
    az2 = (az1 + gap) % (2.0 * np.pi)
    sources = (
        SourceSpec(_speech_like(rng, num_samples), azimuth=az1),
        SourceSpec(_speech_like(rng, num_samples), azimuth=az2),
    )
    return SceneSpec(
        sources=sources,
        geometry=linear_array(NUM_MICS, 0.04),
        sample_rate=SAMPLE_RATE,
        noise=NoiseSpec(snr_db=20.0),
        reference_mic=0,
        seed=2000 + index,
    )


def mvdr_scene_scores(scene, stft_config=StftConfig(512, 128), ref_mic=0):
    """(input_db, aligned output_db) per reference speaker for oracle-IRM MVDR."""
    mix_spec = stft(scene.mixture, stft_config)
    images = [stft(im, stft_config).channel(ref_mic) for im in scene.source_images]
    images.append(stft(scene.noise_image, stft_config).channel(ref_mic))
    mask_set = oracle_mask(images, "irm", mix_spec.channel(ref_mic))
    estimates, _ = separate_mvdr(scene.mixture, mask_set, stft_config, ref_mic)

    inputs = input_sdr(scene, si_sdr)
    result = evaluate_separation(
        [e.samples[0] for e in estimates],
        [im.samples[ref_mic] for im in scene.source_images],
        metric="si_sdr",
        config=MetricConfig(),
    )
    # align to reference index: estimate i was matched to reference perm[i]
    outputs = [0.0] * len(inputs)
    for i, j in enumerate(result["assignment"].permutation):
        outputs[j] = result["per_speaker_db"][i]
    return inputs, outputs


def run_pilot():
    """Improvements (output - input SI-SDR) for every speaker-scene pair."""
    improvements = []
    for index in range(NUM_SCENES):
        scene = render_scene(make_scene(index))
        inputs, outputs = mvdr_scene_scores(scene)
        improvements.extend(out - inp for inp, out in zip(inputs, outputs))
    return np.asarray(improvements)


def write_cli_suite(base_dir, num_scenes=NUM_SCENES):
    """Materialize the pilot suite as dry WAVs plus a CLI scene manifest."""
    from sepfront import audio_io
    from sepfront.dsp import MultichannelWaveform

    base_dir = Path(base_dir)
    (base_dir / "dry").mkdir(parents=True, exist_ok=True)
    scenes = []
    for index in range(num_scenes):
        spec = make_scene(index)
        sources = []
        for k, src in enumerate(spec.sources, start=1):
            rel = f"dry/scene{index:04d}_s{k}.wav"
            audio_io.write_wav(
                base_dir / rel, MultichannelWaveform(src.dry_signal, SAMPLE_RATE)
            )
            sources.append(
                {"path": rel, "azimuth": float(src.azimuth), "gain": float(src.gain)}
            )
        scenes.append(
            {
                "id": f"scene_{index:04d}",
                "seed": spec.seed,
                "reference_mic": spec.reference_mic,
                "sources": sources,
                "noise": {"kind": spec.noise.kind, "snr_db": spec.noise.snr_db},
            }
        )
    manifest = {
        "sample_rate": SAMPLE_RATE,
        "geometry": {
            "mic_positions": linear_array(NUM_MICS, 0.04).mic_positions.tolist()
        },
        "scenes": scenes,
    }
    path = base_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return path


def main():
    improvements = run_pilot()
    record = {
        "num_scenes": NUM_SCENES,
        "num_pairs": len(improvements),
        "mean_improvement_db": float(improvements.mean()),
        "min_improvement_db": float(improvements.min()),
        "fraction_improved": float(np.mean(improvements > 0.0)),
    }
    PILOT_PATH.parent.mkdir(parents=True, exist_ok=True)
    with open(PILOT_PATH, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(record, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
