"""Frame-level acoustic features: 80-band log-Mel spectrogram.

The analysis grid matches the alignment grid exactly: frame ``t`` is centered
at sample ``t * hopsize`` and the frame count is ``ceil(samples / hopsize)``.
The completion choices the band count / hop / window leave open are fixed
here and hashed into the cache key, because retraining requires
bit-compatible features: centered STFT with reflect padding, periodic Hann
window, HTK-formula Mel filterbank spanning 0-8000 Hz, magnitude spectrum,
natural log with a 1e-5 floor.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .errors import FeatureError
from .utils import config_hash


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    hopsize: int = 160
    window_size: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


DEFAULT_MEL = MelConfig()


def _hz_to_mel(hz: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MelConfig = DEFAULT_MEL) -> np.ndarray:
    """Triangular Mel filterbank, shape [n_mels, window_size // 2 + 1]."""
    n_bins = config.window_size // 2 + 1
    fft_freqs = np.linspace(0.0, config.sample_rate / 2.0, n_bins)
    mel_points = np.linspace(
        _hz_to_mel(config.fmin), _hz_to_mel(config.fmax), config.n_mels + 2
    )
    hz_points = _mel_to_hz(mel_points)
    filters = np.zeros((config.n_mels, n_bins), dtype=np.float64)
    for m in range(config.n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (fft_freqs - left) / max(center - left, 1e-12)
        falling = (right - fft_freqs) / max(right - center, 1e-12)
        filters[m] = np.maximum(0.0, np.minimum(rising, falling))
    return filters


def frame_signal(audio: np.ndarray, config: MelConfig = DEFAULT_MEL) -> np.ndarray:
    """Windowed frames on the centered hop grid, shape [T, window_size]."""
    n = len(audio)
    n_frames = -(-n // config.hopsize)
    half = config.window_size // 2
    padded = np.pad(audio.astype(np.float64), half, mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, config.window_size)
    return windows[np.arange(n_frames) * config.hopsize]


def melspectrogram(audio: np.ndarray, config: MelConfig = DEFAULT_MEL) -> np.ndarray:
    """Log-Mel spectrogram, shape [n_mels, ceil(len(audio) / hopsize)]."""
    audio = np.asarray(audio)
    if audio.ndim != 1 or audio.size == 0:
        raise FeatureError(f"expected non-empty mono audio, got shape {audio.shape}")
    if not np.all(np.isfinite(audio)):
        raise FeatureError("audio contains non-finite samples")
    frames = frame_signal(audio, config)
    window = get_window("hann", config.window_size, fftbins=True)
    magnitude = np.abs(np.fft.rfft(frames * window, n=config.window_size, axis=1))
    mel = mel_filterbank(config) @ magnitude.T
    return np.log(np.maximum(mel, config.log_floor)).astype(np.float32)


def frame_rms(audio: np.ndarray, config: MelConfig = DEFAULT_MEL) -> np.ndarray:
    """Per-frame RMS on the same centered grid, shape [T]."""
    frames = frame_signal(audio, config)
    return np.sqrt(np.mean(frames**2, axis=1))


class FeatureCache:
    """On-disk .npy cache keyed by (audio bytes, feature config)."""

    def __init__(self, directory: str | Path, config: MelConfig = DEFAULT_MEL):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config = config

    def key(self, audio: np.ndarray) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(audio, dtype=np.float32).tobytes())
        digest.update(self.config.hash.encode())
        return digest.hexdigest()[:32]

    def melspectrogram(self, audio: np.ndarray) -> np.ndarray:
        path = self.directory / f"{self.key(audio)}.npy"
        if path.exists():
            return np.load(path)
        mel = melspectrogram(audio, self.config)
        np.save(path, mel)
        return mel
