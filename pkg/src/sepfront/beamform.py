"""Mask-weighted spatial covariances and Souden-form MVDR beamforming.

Per frequency f the covariance of a stream is the mask-weighted average of
outer products z[t,f] z[t,f]^H. MVDR weights are the trace-normalized product
of the inverted interference covariance with the target covariance, selected
at the reference microphone. All per-frequency computations are independent.
"""

from dataclasses import dataclass

import numpy as np

from . import tensorio
from .dsp import Spectrogram, istft, stft
from .errors import ConfigurationError, InputError
from .masks import NOISE_LABEL

DEFAULT_LOADING = 1e-7

HERMITIAN_TOL = 1e-8

TRACE_TOL = 1e-12


@dataclass(frozen=True)
class SpatialCovarianceSet:
    """Per-frequency Hermitian covariance matrices with their mask mass."""

    matrices: np.ndarray  # (F, M, M) complex
    mass: np.ndarray  # (F,) real, sum of mask weights per frequency
    zero_mass: np.ndarray  # (F,) bool, frequencies with no mask support

    @property
    def num_freqs(self):
        return self.matrices.shape[0]

    @property
    def num_channels(self):
        return self.matrices.shape[1]


@dataclass(frozen=True)
class BeamformerWeights:
    """Per-frequency M-vectors for one speaker, applied as w^H z."""

    weights: np.ndarray  # (F, M) complex
    reference_mic: int
    passthrough: np.ndarray = None  # (F,) bool, degenerate freqs using u

    def __post_init__(self):
        if self.passthrough is None:
            object.__setattr__(
                self, "passthrough", np.zeros(self.weights.shape[0], dtype=bool)
            )

    def save(self, path):
        tensorio.save_complex_tensor(path, self.weights)


def spatial_covariance(spec, mask):
    """Mask-weighted spatial covariance of a multichannel spectrogram.

    V[f] = sum_t mask[t,f] z[t,f] z[t,f]^H / sum_t mask[t,f]. Frequencies with
    zero mask mass yield the zero matrix and are flagged in zero_mass.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != spec.bins.shape[1:]:
        raise InputError(
            f"mask shape {mask.shape} does not match spectrogram grid "
            f"{spec.bins.shape[1:]}"
        )
    if mask.min() < 0.0:
        raise InputError("mask values must be nonnegative")

    z = spec.bins  # (M, T, F)
    weighted = np.einsum("tf,ctf,dtf->fcd", mask, z, np.conj(z), optimize=True)
    mass = mask.sum(axis=0)
    zero = mass <= 0.0
    matrices = np.zeros_like(weighted)
    matrices[~zero] = weighted[~zero] / mass[~zero, np.newaxis, np.newaxis]
    # symmetrize to remove rounding-level Hermitian drift
    matrices = 0.5 * (matrices + np.conj(np.swapaxes(matrices, 1, 2)))
    return SpatialCovarianceSet(matrices=matrices, mass=mass, zero_mass=zero)


def interference_covariance(all_covs, target):
    """Sum of every non-target stream's covariance (noise included).

    Args:
        all_covs: per-stream SpatialCovarianceSet list, noise stream last or
            anywhere among them.
        target: index of the target stream inside all_covs.
    """
    if not 0 <= target < len(all_covs):
        raise ConfigurationError(f"target stream {target} out of range")
    others = [cov for i, cov in enumerate(all_covs) if i != target]
    if not others:
        raise ConfigurationError("no non-target streams to build interference from")
    matrices = sum(cov.matrices for cov in others)
    mass = sum(cov.mass for cov in others)
    zero = np.all([cov.zero_mass for cov in others], axis=0)
    return SpatialCovarianceSet(matrices=matrices, mass=mass, zero_mass=zero)


def _check_hermitian(matrices, name):
    drift = np.abs(matrices - np.conj(np.swapaxes(matrices, 1, 2))).max()
    scale = max(np.abs(matrices).max(), 1e-300)
    if drift > HERMITIAN_TOL * scale:
        raise InputError(f"{name} covariance is not Hermitian within tolerance")


def mvdr_weights(target, interference, ref_mic, loading=DEFAULT_LOADING):
    """Souden-form MVDR weights per frequency.

    Per frequency: diagonal-load the interference covariance with
    loading * trace/M, solve for inv(V_i) V_t, trace-normalize, and take the
    reference-mic column. Frequencies with near-zero trace fall back to the
    one-hot passthrough weight and are flagged.
    """
    vt = target.matrices
    vi = interference.matrices
    if vt.shape != vi.shape:
        raise InputError("target and interference covariance shapes differ")
    num_freqs, num_mics, _ = vt.shape
    if not 0 <= ref_mic < num_mics:
        raise ConfigurationError(
            f"ref_mic {ref_mic} out of range for {num_mics} channels"
        )
    _check_hermitian(vt, "target")
    _check_hermitian(vi, "interference")

    u = np.zeros(num_mics)
    u[ref_mic] = 1.0
    weights = np.empty((num_freqs, num_mics), dtype=np.complex128)
    passthrough = np.zeros(num_freqs, dtype=bool)
    eye = np.eye(num_mics)
    for f in range(num_freqs):
        trace_i = np.real(np.trace(vi[f]))
        if trace_i <= 0.0:
            weights[f] = u
            passthrough[f] = True
            continue
        loaded = vi[f] + (loading * trace_i / num_mics) * eye
        ratio = np.linalg.solve(loaded, vt[f])
        tr = np.trace(ratio)
        if abs(tr) < TRACE_TOL * num_mics:
            weights[f] = u
            passthrough[f] = True
            continue
        weights[f] = ratio[:, ref_mic] / tr
    return BeamformerWeights(weights=weights, reference_mic=ref_mic, passthrough=passthrough)


def apply_beamformer(weights, spec):
    """Beamformer output S[t,f] = w[f]^H z[t,f] as a single-channel spectrogram."""
    w = weights.weights
    if w.shape[1] != spec.num_channels or w.shape[0] != spec.num_bins:
        raise InputError(
            f"weights of shape {w.shape} do not match spectrogram "
            f"({spec.num_channels} channels, {spec.num_bins} bins)"
        )
    out = np.einsum("fm,mtf->tf", np.conj(w), spec.bins, optimize=True)
    return Spectrogram(
        out[np.newaxis], spec.config, spec.original_length, spec.sample_rate
    )


def separate_mvdr(mixture, mask_set, config, ref_mic=0, loading=DEFAULT_LOADING):
    """Full mask-based MVDR chain: STFT, covariances, MVDR, inverse STFT.

    The noise covariance uses the mask set's noise stream, materialized as
    the clipped residual mask when no explicit noise stream exists.

    Returns:
        (waveforms, flags): K single-channel MultichannelWaveforms and a list
        of per-speaker dicts with passthrough/zero-mass frequency counts.
    """
    spec = stft(mixture, config)
    if not 0 <= ref_mic < spec.num_channels:
        raise ConfigurationError(
            f"ref_mic {ref_mic} out of range for {spec.num_channels} channels"
        )
    if mask_set.masks.shape[1:] != spec.bins.shape[1:]:
        raise InputError(
            "masks were computed under a different STFT configuration "
            f"(mask grid {mask_set.masks.shape[1:]}, mixture grid {spec.bins.shape[1:]})"
        )

    speaker_idx = mask_set.speaker_indices
    covs = [spatial_covariance(spec, mask_set.stream(i)) for i in speaker_idx]
    noise_cov = spatial_covariance(spec, mask_set.noise_mask())

    waveforms = []
    flags = []
    for pos, _ in enumerate(speaker_idx):
        interference = interference_covariance(covs + [noise_cov], pos)
        weights = mvdr_weights(covs[pos], interference, ref_mic, loading=loading)
        beamformed = apply_beamformer(weights, spec)
        waveforms.append(istft(beamformed))
        flags.append(
            {
                "passthrough_freqs": int(weights.passthrough.sum()),
                "zero_mass_freqs": int(covs[pos].zero_mass.sum()),
                "loading": loading,
            }
        )
    return waveforms, flags
