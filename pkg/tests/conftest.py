"""Shared fixtures: tiny synthetic corpora, on-disk corpus trees."""

from __future__ import annotations

import json

import numpy as np
import pytest

from prominence.audio import write_wav
from prominence.synthetic import build_synthetic_corpus, write_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_items():
    """Thirty featurized synthetic utterances with ground-truth targets."""
    return build_synthetic_corpus(30, seed=202)


@pytest.fixture(scope="session")
def trained_tiny(tiny_items):
    """A briefly trained intermediate+sum model shared by read-only tests."""
    from prominence.model import ModelConfig
    from prominence.training import TrainConfig, train

    result = train(
        ModelConfig(location="intermediate", method="sum"),
        TrainConfig(max_steps=40, validate_every=20, max_frames_per_batch=4000, seed=0),
        tiny_items[:24],
        tiny_items[24:],
    )
    return result


@pytest.fixture()
def disk_corpus(tmp_path):
    """A small corpus written to disk: WAVs, alignments, manifest, annotations."""
    manifest = write_synthetic_corpus(
        tmp_path / "corpus", n_utterances=8, seed=7, annotators_per_utterance=3
    )
    return manifest


def make_manifest_entry(directory, utt_id, n_words=3, seed=0):
    """One hand-built utterance: 0.2 s per word, deterministic audio."""
    rng = np.random.default_rng(seed)
    word_frames = 20
    audio = rng.normal(scale=0.1, size=n_words * word_frames * 160).astype(np.float32)
    write_wav(directory / f"{utt_id}.wav", audio)
    alignment = [
        {
            "word": f"word{w}",
            "start_s": w * word_frames * 0.01,
            "end_s": (w + 1) * word_frames * 0.01,
        }
        for w in range(n_words)
    ]
    (directory / f"{utt_id}.json").write_text(json.dumps(alignment))
    return {
        "id": utt_id,
        "speaker": "spk0",
        "audio": f"{utt_id}.wav",
        "alignment": f"{utt_id}.json",
    }
