"""Training-free prominence baseline.

A composite prosodic signal (pitch, energy, duration, each z-scored over the
utterance) is analyzed with a continuous wavelet transform using the
Mexican-hat mother wavelet over dyadic scales spanning roughly word-to-phrase
durations. A word's prominence score is the largest positive wavelet
coefficient inside its frame span; emphasis labels come from thresholding.

The pitch tracker is a plain normalized-autocorrelation tracker with linear
interpolation through unvoiced regions, which keeps the whole baseline
deterministic and dependency-free. It is not a numerical replica of any
third-party implementation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import medfilt

from .corpus import WordSpan
from .errors import SpanError
from .features import DEFAULT_MEL, MelConfig, frame_rms

# Dyadic scale ladder in frames (10 ms each): 20 ms up to 1.28 s.
DEFAULT_SCALES = (2, 4, 8, 16, 32, 64)
F0_MIN = 50.0
F0_MAX = 550.0
VOICING_THRESHOLD = 0.45
ENERGY_FLOOR = 1e-8


@dataclass
class ProsodicSignal:
    """Composite prosodic contour on the mel frame grid."""

    values: np.ndarray
    f0: np.ndarray
    energy: np.ndarray
    duration: np.ndarray
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    notes: list[str] = field(default_factory=list)


def zscore(values: np.ndarray) -> np.ndarray:
    """Z-score over the utterance; constant signals normalize to zero."""
    values = np.asarray(values, dtype=np.float64)
    std = values.std()
    if std < 1e-12:
        return np.zeros_like(values)
    return (values - values.mean()) / std


def track_f0(
    audio: np.ndarray,
    config: MelConfig = DEFAULT_MEL,
    fmin: float = F0_MIN,
    fmax: float = F0_MAX,
) -> tuple[np.ndarray, np.ndarray]:
    """Frame-level f0 (Hz) and voicing flags via normalized autocorrelation."""
    n = len(audio)
    n_frames = -(-n // config.hopsize)
    frame_len = 1024
    half = frame_len // 2
    padded = np.pad(audio.astype(np.float64), half, mode="reflect")
    lag_min = max(2, int(config.sample_rate / fmax))
    lag_max = min(frame_len - 1, int(config.sample_rate / fmin))
    rms = frame_rms(audio, config)
    rms_gate = max(ENERGY_FLOOR, 0.05 * rms.max())

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for t in range(n_frames):
        frame = padded[t * config.hopsize : t * config.hopsize + frame_len]
        frame = frame - frame.mean()
        energy = np.dot(frame, frame)
        if energy < 1e-10 or rms[t] < rms_gate:
            continue
        spectrum = np.fft.rfft(frame, n=2 * frame_len)
        autocorr = np.fft.irfft(spectrum * np.conj(spectrum))[: frame_len]
        autocorr /= autocorr[0]
        window = autocorr[lag_min : lag_max + 1]
        peak = int(np.argmax(window))
        if window[peak] >= VOICING_THRESHOLD:
            voiced[t] = True
            f0[t] = config.sample_rate / (lag_min + peak)
    # Median-of-3 over voiced frames removes single-frame octave errors
    # at word onsets.
    if voiced.sum() >= 3:
        f0[voiced] = medfilt(f0[voiced], 3)
    return f0, voiced


def _interpolate_unvoiced(f0: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    if not voiced.any():
        return np.zeros_like(f0)
    indices = np.arange(len(f0), dtype=np.float64)
    return np.interp(indices, indices[voiced], f0[voiced])


def duration_signal(spans: list[WordSpan], n_frames: int) -> np.ndarray:
    """Per-frame word length (frames); silent gaps carry zero."""
    signal = np.zeros(n_frames)
    for span in spans:
        signal[span.start_frame : span.end_frame] = span.n_frames
    return signal


def composite_signal(
    audio: np.ndarray,
    spans: list[WordSpan],
    config: MelConfig = DEFAULT_MEL,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> ProsodicSignal:
    """Equal-weight sum of z-scored log-f0, log-energy, and duration contours."""
    n_frames = -(-len(audio) // config.hopsize)
    notes = []

    raw_f0, voiced = track_f0(audio, config)
    if not voiced.any():
        notes.append("fully unvoiced utterance: f0 component zeroed")
        warnings.warn(notes[-1], stacklevel=2)
        f0_component = np.zeros(n_frames)
    else:
        contour = _interpolate_unvoiced(raw_f0, voiced)
        f0_component = zscore(np.log(np.maximum(contour, 1.0)))

    energy_component = zscore(np.log(np.maximum(frame_rms(audio, config), ENERGY_FLOOR)))
    dur_component = zscore(duration_signal(spans, n_frames))

    w_f0, w_energy, w_dur = weights
    values = w_f0 * f0_component + w_energy * energy_component + w_dur * dur_component
    return ProsodicSignal(values, f0_component, energy_component, dur_component, weights, notes)


def ricker(points: int, scale: float) -> np.ndarray:
    """Mexican-hat (second Gaussian derivative) wavelet, unit L2 norm shape."""
    amplitude = 2.0 / (np.sqrt(3.0 * scale) * np.pi**0.25)
    t = np.arange(points) - (points - 1.0) / 2.0
    gauss = np.exp(-(t**2) / (2.0 * scale**2))
    return amplitude * (1.0 - (t / scale) ** 2) * gauss


def cwt(signal: np.ndarray, scales: tuple[int, ...] = DEFAULT_SCALES) -> np.ndarray:
    """Continuous wavelet transform, shape [n_scales, T]."""
    signal = np.asarray(signal, dtype=np.float64)
    rows = []
    for scale in scales:
        width = min(10 * int(scale), len(signal))
        rows.append(np.convolve(signal, ricker(width, scale), mode="same"))
    return np.stack(rows)


def wavelet_prominence(
    signal: ProsodicSignal | np.ndarray,
    spans: list[WordSpan],
    scales: tuple[int, ...] = DEFAULT_SCALES,
) -> np.ndarray:
    """Per-word score: the maximum positive CWT coefficient within the span."""
    values = signal.values if isinstance(signal, ProsodicSignal) else np.asarray(signal)
    n_frames = len(values)
    for span in spans:
        if span.end_frame > n_frames:
            raise SpanError(
                f"span {span.token!r} ends at {span.end_frame}, "
                f"signal has {n_frames} frames"
            )
    coefficients = cwt(values, scales)
    scores = np.empty(len(spans))
    for w, span in enumerate(spans):
        window = coefficients[:, span.start_frame : span.end_frame]
        scores[w] = max(0.0, float(window.max()))
    return scores


def wavelet_scores(
    audio: np.ndarray,
    spans: list[WordSpan],
    config: MelConfig = DEFAULT_MEL,
    scales: tuple[int, ...] = DEFAULT_SCALES,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """Audio-to-scores convenience wrapper."""
    return wavelet_prominence(composite_signal(audio, spans, config, weights), spans, scales)


def threshold_classify(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Binary emphasis: 1 iff score > threshold."""
    return (np.asarray(scores) > threshold).astype(int)


def fit_threshold(scores: np.ndarray, targets: np.ndarray) -> float:
    """Pick the score threshold maximizing Pearson between binarized scores
    and targets on a validation set."""
    from .evaluation import pearson

    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    unique = np.unique(scores)
    if len(unique) < 2:
        return float(unique[0]) if len(unique) else 0.0
    candidates = (unique[:-1] + unique[1:]) / 2.0
    best_threshold, best_corr = float(candidates[0]), -np.inf
    for candidate in candidates:
        binary = threshold_classify(scores, candidate).astype(np.float64)
        if binary.min() == binary.max() or targets.min() == targets.max():
            continue
        corr = pearson(binary, targets)
        if corr > best_corr:
            best_corr, best_threshold = corr, float(candidate)
    return best_threshold
