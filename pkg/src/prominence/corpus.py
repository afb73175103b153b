"""Corpus loading: utterances, word alignments on the frame grid, partitioning.

Alignments are consumed as JSON files (one list of ``{word, start_s, end_s}``
objects per utterance); a TextGrid import converter is provided for corpora
aligned with Praat-style tools. All frame indexing uses the analysis grid of
the feature extractor: ``frame = seconds * sample_rate / hopsize``.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .audio import wav_sample_count
from .errors import AlignmentError, CorpusError, PartitionError

HOPSIZE = 160
SAMPLE_RATE = 16000

# Absorbs float representation error so that frame -> seconds -> frame
# round-trips exactly.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class WordSpan:
    """One word and its half-open frame interval [start_frame, end_frame)."""

    token: str
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if not (0 <= self.start_frame < self.end_frame):
            raise AlignmentError(
                f"invalid span for {self.token!r}: "
                f"[{self.start_frame}, {self.end_frame})"
            )

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame

    @property
    def center_frame(self) -> int:
        # Even-length spans take the lower of the two middle frames.
        return (self.start_frame + self.end_frame - 1) // 2


@dataclass
class Utterance:
    """One transcribed recording with per-word frame spans."""

    id: str
    speaker_id: str
    audio_ref: Path
    sample_rate: int
    words: list[WordSpan] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.words:
            raise CorpusError(f"utterance {self.id!r} has no words")
        for prev, nxt in zip(self.words, self.words[1:]):
            if nxt.start_frame < prev.end_frame:
                raise AlignmentError(
                    f"utterance {self.id!r}: spans overlap at "
                    f"{prev.token!r} -> {nxt.token!r}"
                )

    @property
    def n_words(self) -> int:
        return len(self.words)

    @property
    def tokens(self) -> list[str]:
        return [w.token for w in self.words]


@dataclass(frozen=True)
class Partition:
    train: tuple[str, ...]
    valid: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def part_of(self, utterance_id: str) -> str:
        for name in ("train", "valid", "test"):
            if utterance_id in getattr(self, name):
                return name
        raise KeyError(utterance_id)


def seconds_to_frames(
    start_s: float,
    end_s: float,
    hopsize: int = HOPSIZE,
    sample_rate: int = SAMPLE_RATE,
) -> tuple[int, int]:
    """Convert a word's time interval to frame bounds on the analysis grid.

    The start frame floors and the end frame rounds half-up; every word is
    widened to at least one frame so that it receives a prominence value.
    """
    if not 0.0 <= start_s < end_s:
        raise AlignmentError(f"invalid interval [{start_s}, {end_s})")
    start_frame = int(math.floor(start_s * sample_rate / hopsize + _GRID_EPS))
    end_frame = int(math.floor(end_s * sample_rate / hopsize + 0.5 + _GRID_EPS))
    end_frame = max(start_frame + 1, end_frame)
    return start_frame, end_frame


def frames_to_seconds(
    span: WordSpan, hopsize: int = HOPSIZE, sample_rate: int = SAMPLE_RATE
) -> tuple[float, float]:
    return (
        span.start_frame * hopsize / sample_rate,
        span.end_frame * hopsize / sample_rate,
    )


def spans_from_alignment(
    alignment: list[dict],
    hopsize: int = HOPSIZE,
    sample_rate: int = SAMPLE_RATE,
) -> list[WordSpan]:
    """Build ordered WordSpans from ``{word, start_s, end_s}`` entries."""
    entries = sorted(alignment, key=lambda item: float(item["start_s"]))
    spans = []
    for entry in entries:
        start, end = seconds_to_frames(
            float(entry["start_s"]), float(entry["end_s"]), hopsize, sample_rate
        )
        spans.append(WordSpan(str(entry["word"]), start, end))
    return spans


def n_frames_for_samples(n_samples: int, hopsize: int = HOPSIZE) -> int:
    """Frame count of the centered analysis grid: ceil(samples / hopsize)."""
    return -(-n_samples // hopsize)


def load_corpus(manifest: str | Path, validate_audio: bool = True) -> list[Utterance]:
    """Load a corpus manifest: JSON list of {id, speaker, audio, alignment}.

    Relative paths are resolved against the manifest's directory. Optional
    per-entry ``transcript`` (space-separated) is checked against the
    alignment word count.
    """
    manifest = Path(manifest)
    if not manifest.exists():
        raise CorpusError(f"manifest not found: {manifest}")
    try:
        entries = json.loads(manifest.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed manifest {manifest}: {exc}") from exc

    root = manifest.parent
    utterances = []
    for entry in entries:
        utt_id = str(entry["id"])
        audio_path = (root / entry["audio"]).resolve()
        alignment_path = (root / entry["alignment"]).resolve()
        if validate_audio and not audio_path.exists():
            raise CorpusError(f"utterance {utt_id!r}: missing audio {audio_path}")
        if not alignment_path.exists():
            raise CorpusError(f"utterance {utt_id!r}: missing alignment {alignment_path}")
        alignment = json.loads(alignment_path.read_text(encoding="utf-8"))
        spans = spans_from_alignment(alignment)
        transcript = entry.get("transcript")
        if transcript is not None and len(transcript.split()) != len(spans):
            raise AlignmentError(
                f"utterance {utt_id!r}: alignment has {len(spans)} words, "
                f"transcript has {len(transcript.split())}"
            )
        utterance = Utterance(
            id=utt_id,
            speaker_id=str(entry.get("speaker", "")),
            audio_ref=audio_path,
            sample_rate=int(entry.get("sample_rate", SAMPLE_RATE)),
            words=spans,
        )
        if validate_audio:
            total = n_frames_for_samples(wav_sample_count(audio_path))
            if utterance.words[-1].end_frame > total:
                raise AlignmentError(
                    f"utterance {utt_id!r}: last word ends at frame "
                    f"{utterance.words[-1].end_frame} but audio has {total} frames"
                )
        utterances.append(utterance)
    return utterances


def save_corpus(utterances: list[Utterance], directory: str | Path) -> Path:
    """Write a manifest plus one alignment JSON per utterance; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for utt in utterances:
        alignment = [
            {"word": span.token, "start_s": start, "end_s": end}
            for span, (start, end) in ((s, frames_to_seconds(s)) for s in utt.words)
        ]
        alignment_path = directory / f"{utt.id}.alignment.json"
        alignment_path.write_text(json.dumps(alignment, indent=2), encoding="utf-8")
        entries.append(
            {
                "id": utt.id,
                "speaker": utt.speaker_id,
                "audio": str(utt.audio_ref),
                "alignment": alignment_path.name,
                "sample_rate": utt.sample_rate,
            }
        )
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=2), encoding="utf-8")
    return manifest


def partition_corpus(
    utterance_ids: list[str],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> Partition:
    """Deterministic utterance-level split; floor-based sizes, remainder to train."""
    ids = sorted(set(utterance_ids))
    if len(ids) < 3:
        raise PartitionError(f"need at least 3 utterances, got {len(ids)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise PartitionError(f"ratios must sum to 1, got {ratios}")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    n_valid = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_valid - n_test
    return Partition(
        train=tuple(ids[:n_train]),
        valid=tuple(ids[n_train : n_train + n_valid]),
        test=tuple(ids[n_train + n_valid :]),
        seed=seed,
    )


_TG_INTERVAL = re.compile(
    r"intervals\s*\[\d+\]:\s*"
    r"xmin\s*=\s*([\d.eE+-]+)\s*"
    r"xmax\s*=\s*([\d.eE+-]+)\s*"
    r'text\s*=\s*"(.*?)"',
    re.DOTALL,
)

SILENCE_LABELS = frozenset({"", "sp", "sil", "spn", "<sil>"})


def textgrid_to_alignment(
    path: str | Path, tier: str = "words", skip_labels: frozenset[str] = SILENCE_LABELS
) -> list[dict]:
    """Convert one tier of a long-format TextGrid into alignment JSON entries."""
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    # Isolate the requested tier; fall back to the whole file when unnamed.
    tier_match = re.search(
        rf'name\s*=\s*"{re.escape(tier)}"(.*?)(?=item\s*\[|\Z)', text, re.DOTALL
    )
    section = tier_match.group(1) if tier_match else text
    alignment = []
    for xmin, xmax, token in _TG_INTERVAL.findall(section):
        token = token.strip()
        if token.lower() in skip_labels:
            continue
        alignment.append({"word": token, "start_s": float(xmin), "end_s": float(xmax)})
    if not alignment:
        raise AlignmentError(f"no word intervals found in {path} (tier {tier!r})")
    return alignment
