"""Oracle time-frequency masks and mask-based separation.

Oracle masks are computed from ground-truth source and noise images at the
reference microphone and stand in for an external mask estimator. Externally
estimated masks can be imported through the tensor file format instead.
"""

from dataclasses import dataclass

import numpy as np

from . import tensorio
from .dsp import Spectrogram, istft, stft
from .errors import ConfigurationError, InputError

MASK_EPS = 1e-12

NOISE_LABEL = "noise"

MASK_KINDS = ("ibm", "irm", "psm")


@dataclass(frozen=True)
class MaskSet:
    """Real T-F masks, streams x frames x frequencies, with stream labels."""

    masks: np.ndarray
    labels: tuple

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=np.float64)
        if masks.ndim != 3:
            raise InputError(f"masks must be 3-D, got ndim={masks.ndim}")
        labels = tuple(self.labels)
        if len(labels) != masks.shape[0]:
            raise InputError(
                f"{len(labels)} labels for {masks.shape[0]} mask streams"
            )
        if masks.min() < 0.0:
            raise InputError("mask values must be nonnegative")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "labels", labels)

    @property
    def num_streams(self):
        return self.masks.shape[0]

    @property
    def speaker_indices(self):
        return [i for i, lab in enumerate(self.labels) if lab != NOISE_LABEL]

    def stream(self, index):
        return self.masks[index]

    def noise_mask(self):
        """Noise stream, materialized as clip(1 - sum of speaker masks) if absent."""
        if NOISE_LABEL in self.labels:
            return self.masks[self.labels.index(NOISE_LABEL)]
        residual = 1.0 - self.masks.sum(axis=0)
        return np.clip(residual, 0.0, 1.0)

    def save(self, path):
        tensorio.save_tensor(path, self.masks)

    @classmethod
    def load(cls, path, labels=None):
        masks = np.asarray(tensorio.load_tensor(path), dtype=np.float64)
        if labels is None:
            labels = tuple(f"speaker_{i + 1}" for i in range(masks.shape[0]))
        return cls(np.clip(masks, 0.0, None), labels)


def oracle_mask(images, kind, mixture):
    """Oracle masks from ground-truth images at the reference microphone.

    Args:
        images: K+1 single-channel Spectrograms, K source images followed by
            the noise image, all at the same mic and StftConfig as mixture.
        kind: "ibm" (binary, ties to the lowest stream), "irm" (magnitude
            ratio), or "psm" (phase-sensitive, clipped to [0, 1]).
        mixture: single-channel mixture Spectrogram at the same mic.

    Returns:
        MaskSet with K speaker streams plus a noise stream.
    """
    if kind not in MASK_KINDS:
        raise ConfigurationError(f"unsupported mask kind: {kind!r}")
    if len(images) < 2:
        raise InputError("need at least one source image plus the noise image")

    shape = mixture.bins.shape
    stack = []
    for image in images:
        if image.bins.shape != shape:
            raise InputError("all reference spectrograms must match the mixture shape")
        stack.append(image.bins[0])
    refs = np.stack(stack)  # (K+1, T, F)
    mix = mixture.bins[0]

    if kind == "ibm":
        mags = np.abs(refs)
        winner = np.argmax(mags, axis=0)  # first max wins: lowest stream index
        masks = (winner[np.newaxis] == np.arange(len(images))[:, None, None])
        masks = masks.astype(np.float64)
    elif kind == "irm":
        mags = np.abs(refs)
        masks = mags / (mags.sum(axis=0) + MASK_EPS)
    else:  # psm
        proj = np.real(refs * np.conj(mix))
        masks = np.clip(proj / (np.abs(mix) ** 2 + MASK_EPS), 0.0, 1.0)

    labels = tuple(f"speaker_{i + 1}" for i in range(len(images) - 1)) + (NOISE_LABEL,)
    return MaskSet(masks, labels)


def apply_mask(mask, spec):
    """Point-wise product of a real mask with a single-channel spectrogram."""
    mask = np.asarray(mask, dtype=np.float64)
    if spec.num_channels != 1:
        raise InputError("apply_mask expects a single-channel spectrogram")
    if mask.shape != spec.bins.shape[1:]:
        raise InputError(
            f"mask shape {mask.shape} does not match spectrogram "
            f"{spec.bins.shape[1:]}"
        )
    return Spectrogram(
        spec.bins * mask[np.newaxis], spec.config, spec.original_length, spec.sample_rate
    )


def separate_masking(mixture, mask_set, config, ref_mic=0):
    """Mask-based separation at the reference channel.

    STFT of the mixture, per-speaker mask application on channel ref_mic,
    inverse STFT. The noise stream, if present, is not rendered.

    Returns:
        list of K single-channel MultichannelWaveforms.
    """
    spec = stft(mixture, config)
    if not 0 <= ref_mic < spec.num_channels:
        raise ConfigurationError(
            f"ref_mic {ref_mic} out of range for {spec.num_channels} channels"
        )
    ref = spec.channel(ref_mic)
    if mask_set.masks.shape[1:] != ref.bins.shape[1:]:
        raise InputError(
            "masks were computed under a different STFT configuration "
            f"(mask grid {mask_set.masks.shape[1:]}, mixture grid {ref.bins.shape[1:]})"
        )
    return [istft(apply_mask(mask_set.stream(k), ref)) for k in mask_set.speaker_indices]
