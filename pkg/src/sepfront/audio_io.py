"""WAV file reading and writing (RIFF, PCM16 or IEEE float32)."""

import numpy as np
from scipy.io import wavfile

from .dsp import MultichannelWaveform
from .errors import InputError


def read_wav(path):
    """Read a WAV file into a MultichannelWaveform (float64, channels x length)."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, FileNotFoundError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise InputError(f"{path}: unsupported WAV sample format {data.dtype}")
    return MultichannelWaveform(samples.T, int(rate))


def write_wav(path, waveform, fmt="float32"):
    """Write a MultichannelWaveform; fmt is "float32" (default) or "pcm16"."""
    data = waveform.samples.T
    if fmt == "float32":
        wavfile.write(path, waveform.sample_rate, data.astype(np.float32))
    elif fmt == "pcm16":
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, waveform.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise InputError(f"unsupported WAV format: {fmt!r}")
