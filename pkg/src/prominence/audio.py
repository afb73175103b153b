"""Mono 16-bit WAV IO on the 16 kHz grid the rest of the toolkit assumes."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import CorpusError

SAMPLE_RATE = 16000


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a PCM WAV file as mono float32 in [-1, 1].

    Multi-channel audio is averaged down to mono.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"audio file not found: {path}")
    with wave.open(str(path), "rb") as handle:
        n_channels = handle.getnchannels()
        width = handle.getsampwidth()
        rate = handle.getframerate()
        frames = handle.readframes(handle.getnframes())
    if width != 2:
        raise CorpusError(f"unsupported sample width {width * 8} bit: {path}")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write mono float samples in [-1, 1] as 16-bit PCM."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(sample_rate)
        handle.writeframes(pcm.tobytes())


def wav_duration_seconds(path: str | Path) -> float:
    """Duration from the WAV header without decoding samples."""
    with wave.open(str(path), "rb") as handle:
        return handle.getnframes() / handle.getframerate()


def wav_sample_count(path: str | Path) -> int:
    with wave.open(str(path), "rb") as handle:
        return handle.getnframes()


def load_audio_16k(path: str | Path) -> np.ndarray:
    """Read audio and resample to 16 kHz if necessary."""
    samples, rate = read_wav(path)
    if rate != SAMPLE_RATE:
        samples = resample_poly(samples, SAMPLE_RATE, rate).astype(np.float32)
    return samples
