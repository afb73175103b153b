"""Synthetic speech-like corpora for tests, demos, and study dry-runs.

Utterances are sequences of harmonic "words" separated by silent gaps, built
exactly on the 10 ms frame grid. Ground-truth prominence is the per-word RMS
energy normalized within the utterance, so a working model must recover it
from the spectrogram alone.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .annotations import AnnotationRecord
from .audio import write_wav
from .corpus import HOPSIZE, SAMPLE_RATE, WordSpan, frames_to_seconds
from .features import DEFAULT_MEL, MelConfig, melspectrogram
from .prepare import PreparedUtterance


def harmonic_word(
    rng: np.random.Generator,
    n_samples: int,
    f0: float,
    amplitude: float,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """A vowel-like harmonic stack with a smooth onset/offset envelope."""
    t = np.arange(n_samples) / sample_rate
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = np.zeros(n_samples)
    for harmonic, gain in enumerate((1.0, 0.5, 0.25, 0.125), start=1):
        wave += gain * np.sin(2.0 * np.pi * f0 * harmonic * t + phase * harmonic)
    ramp = max(4, n_samples // 10)
    envelope = np.ones(n_samples)
    fade = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
    envelope[:ramp] = fade
    envelope[-ramp:] = fade[::-1]
    wave *= envelope
    return amplitude * wave / np.max(np.abs(wave))


def synthetic_utterance(
    utterance_id: str,
    rng: np.random.Generator,
    n_words: tuple[int, int] = (4, 7),
    frames_per_word: tuple[int, int] = (8, 16),
    gap_frames: tuple[int, int] = (2, 5),
) -> tuple[np.ndarray, list[WordSpan], np.ndarray]:
    """Returns (audio, spans, prominence) with prominence = normalized word RMS."""
    count = int(rng.integers(n_words[0], n_words[1] + 1))
    pieces: list[np.ndarray] = []
    spans: list[WordSpan] = []
    cursor = int(rng.integers(gap_frames[0], gap_frames[1] + 1))
    pieces.append(np.zeros(cursor * HOPSIZE))
    rms_values = []
    for w in range(count):
        frames = int(rng.integers(frames_per_word[0], frames_per_word[1] + 1))
        f0 = float(rng.uniform(100.0, 280.0))
        amplitude = float(rng.uniform(0.08, 0.9))
        word = harmonic_word(rng, frames * HOPSIZE, f0, amplitude)
        spans.append(WordSpan(f"w{w}", cursor, cursor + frames))
        pieces.append(word)
        rms_values.append(float(np.sqrt(np.mean(word**2))))
        cursor += frames
        gap = int(rng.integers(gap_frames[0], gap_frames[1] + 1))
        pieces.append(np.zeros(gap * HOPSIZE))
        cursor += gap
    audio = np.concatenate(pieces).astype(np.float32)
    prominence = np.array(rms_values) / max(rms_values)
    return audio, spans, prominence


def build_synthetic_corpus(
    n_utterances: int,
    seed: int = 0,
    mel_config: MelConfig = DEFAULT_MEL,
    keep_audio: bool = False,
    **utterance_kwargs,
) -> list[PreparedUtterance]:
    """In-memory featurized corpus; set keep_audio to also get raw waveforms."""
    rng = np.random.default_rng(seed)
    items = []
    for index in range(n_utterances):
        audio, spans, prominence = synthetic_utterance(
            f"syn{index:04d}", rng, **utterance_kwargs
        )
        item = PreparedUtterance(
            id=f"syn{index:04d}",
            mel=melspectrogram(audio, mel_config),
            spans=spans,
            target=prominence.astype(np.float32),
        )
        if keep_audio:
            item.audio = audio  # ad-hoc attribute for baseline tests
        items.append(item)
    return items


def write_synthetic_corpus(
    directory: str | Path,
    n_utterances: int,
    seed: int = 0,
    annotators_per_utterance: int = 0,
    **utterance_kwargs,
) -> Path:
    """Write WAVs, alignments, a manifest, and (optionally) annotation files.

    Returns the manifest path. Annotations are sampled per word from the
    ground-truth prominence, so aggregating them recovers it in expectation.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for index in range(n_utterances):
        utt_id = f"syn{index:04d}"
        audio, spans, prominence = synthetic_utterance(utt_id, rng, **utterance_kwargs)
        write_wav(directory / f"{utt_id}.wav", audio)
        alignment = [
            {"word": span.token, "start_s": start, "end_s": end}
            for span, (start, end) in ((s, frames_to_seconds(s)) for s in spans)
        ]
        (directory / f"{utt_id}.alignment.json").write_text(
            json.dumps(alignment), encoding="utf-8"
        )
        entry = {
            "id": utt_id,
            "speaker": f"spk{index % 4}",
            "audio": f"{utt_id}.wav",
            "alignment": f"{utt_id}.alignment.json",
        }
        if annotators_per_utterance:
            records = sample_annotations(
                utt_id, prominence, annotators_per_utterance, rng
            )
            payload = {
                "utterance_id": utt_id,
                "annotations": [
                    {"annotator": record.annotator_id, "labels": list(record.labels)}
                    for record in records
                ],
            }
            (directory / f"{utt_id}.annotations.json").write_text(
                json.dumps(payload), encoding="utf-8"
            )
            entry["annotations"] = f"{utt_id}.annotations.json"
        entries.append(entry)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=2), encoding="utf-8")
    return manifest


def sample_annotations(
    utterance_id: str,
    prominence: np.ndarray,
    n_annotators: int,
    rng: np.random.Generator,
    annotator_prefix: str = "ann",
) -> list[AnnotationRecord]:
    """Sample binary emphasis vectors from per-word Bernoulli parameters."""
    records = []
    for a in range(n_annotators):
        labels = tuple(int(rng.random() < p) for p in prominence)
        records.append(
            AnnotationRecord(f"{annotator_prefix}{a:03d}", utterance_id, labels)
        )
    return records
