"""Glue between corpus, features, and targets: fully featurized utterances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import ProminenceTarget
from .audio import load_audio_16k
from .corpus import Utterance, WordSpan, n_frames_for_samples
from .errors import CorpusError
from .features import DEFAULT_MEL, FeatureCache, MelConfig, melspectrogram
from .validation import check_spans


@dataclass
class PreparedUtterance:
    """Everything the model needs for one utterance."""

    id: str
    mel: np.ndarray  # [n_mels, T] float32
    spans: list[WordSpan]
    target: np.ndarray | None = None  # [W] prominence, when annotated

    @property
    def n_frames(self) -> int:
        return self.mel.shape[1]

    @property
    def n_words(self) -> int:
        return len(self.spans)

    @property
    def bounds(self) -> list[tuple[int, int]]:
        return [(s.start_frame, s.end_frame) for s in self.spans]


def prepare_utterance(
    utterance: Utterance,
    target: ProminenceTarget | None = None,
    mel_config: MelConfig = DEFAULT_MEL,
    cache: FeatureCache | None = None,
) -> PreparedUtterance:
    audio = load_audio_16k(utterance.audio_ref)
    mel = cache.melspectrogram(audio) if cache else melspectrogram(audio, mel_config)
    check_spans(utterance.words, mel.shape[1])
    prominence = None
    if target is not None:
        if len(target.prominence) != utterance.n_words:
            raise CorpusError(
                f"utterance {utterance.id!r}: {len(target.prominence)} targets "
                f"for {utterance.n_words} words"
            )
        prominence = np.asarray(target.prominence, dtype=np.float32)
    return PreparedUtterance(utterance.id, mel, utterance.words, prominence)


def prepare_corpus(
    utterances: list[Utterance],
    targets: dict[str, ProminenceTarget] | None = None,
    mel_config: MelConfig = DEFAULT_MEL,
    cache: FeatureCache | None = None,
    require_targets: bool = False,
) -> list[PreparedUtterance]:
    prepared = []
    for utterance in utterances:
        target = targets.get(utterance.id) if targets else None
        if target is None and require_targets:
            continue
        prepared.append(prepare_utterance(utterance, target, mel_config, cache))
    return prepared


def expected_frames(utterance: Utterance, hopsize: int) -> int:
    from .audio import wav_sample_count

    return n_frames_for_samples(wav_sample_count(utterance.audio_ref), hopsize)
