"""Neural prominence estimator.

A framewise convolutional encoder and a wordwise convolutional decoder,
joined by variable-stride downsampling from the frame grid to the word grid.
The downsampling location is configurable:

- ``framewise``:    the full conv stack runs at frame resolution and is
                    trained against frame-interpolated targets; scores are
                    reduced to words only at inference.
- ``posthoc``:      the full stack runs at frame resolution; its scalar
                    frame scores are reduced to words before the loss.
- ``intermediate``: features are reduced to words between the encoder and
                    the decoder, so the decoder convolves over words.
- ``prehoc``:       the input is segmented per word and the encoder runs on
                    each segment in isolation, so its receptive field never
                    crosses a word boundary.

Every variant stacks twelve convolutions (kernel 3, same padding, ReLU
between layers) so depth comparisons across locations are fair. The
reduction method is ``average``, ``max``, ``sum``, or ``center``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .corpus import WordSpan
from .errors import ConfigError, SpanError

LOCATIONS = ("framewise", "posthoc", "intermediate", "prehoc")
METHODS = ("average", "max", "sum", "center")
LOSSES = ("bce", "mse")


@dataclass(frozen=True)
class ModelConfig:
    location: str = "intermediate"
    method: str = "sum"
    layers_per_stack: int = 6
    channels: int = 80
    kernel_size: int = 3
    activation: str = "relu"
    loss: str = "bce"

    def __post_init__(self) -> None:
        if self.location not in LOCATIONS:
            raise ConfigError(f"location must be one of {LOCATIONS}, got {self.location!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.activation != "relu":
            raise ConfigError("only relu activation is supported")
        if self.layers_per_stack < 1 or self.channels < 1 or self.kernel_size < 1:
            raise ConfigError("layers_per_stack, channels, kernel_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def _as_bounds(spans: list[WordSpan] | list[tuple[int, int]]) -> list[tuple[int, int]]:
    if spans and isinstance(spans[0], WordSpan):
        return [(s.start_frame, s.end_frame) for s in spans]
    return [(int(s), int(e)) for s, e in spans]


def downsample(
    features: torch.Tensor | np.ndarray,
    spans: list[WordSpan] | list[tuple[int, int]],
    method: str,
) -> torch.Tensor | np.ndarray:
    """Reduce frame-resolution features [C, T] to word resolution [C, W].

    Frames between words (silent gaps) are never aggregated into any word.
    ``center`` takes frame ``(start + end - 1) // 2``; even-length spans use
    the lower middle frame.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown downsampling method {method!r}")
    if not spans:
        raise SpanError("no word spans to downsample to")
    was_numpy = isinstance(features, np.ndarray)
    tensor = torch.from_numpy(features) if was_numpy else features
    if tensor.dim() != 2:
        raise SpanError(f"expected [C, T] features, got shape {tuple(tensor.shape)}")
    total = tensor.shape[1]
    bounds = _as_bounds(spans)
    for start, end in bounds:
        if start < 0 or end > total or start >= end:
            raise SpanError(f"span [{start}, {end}) outside features [0, {total})")

    if method == "center":
        centers = torch.tensor(
            [(s + e - 1) // 2 for s, e in bounds], device=tensor.device
        )
        out = tensor.index_select(1, centers)
    elif method == "max":
        out = torch.stack(
            [tensor[:, s:e].amax(dim=1) for s, e in bounds], dim=1
        )
    else:
        frame_index = torch.cat(
            [torch.arange(s, e, device=tensor.device) for s, e in bounds]
        )
        word_index = torch.cat(
            [
                torch.full((e - s,), w, dtype=torch.long, device=tensor.device)
                for w, (s, e) in enumerate(bounds)
            ]
        )
        out = torch.zeros(
            tensor.shape[0], len(bounds), dtype=tensor.dtype, device=tensor.device
        ).index_add(1, word_index, tensor.index_select(1, frame_index))
        if method == "average":
            lengths = torch.tensor(
                [e - s for s, e in bounds], dtype=tensor.dtype, device=tensor.device
            )
            out = out / lengths
    return out.numpy() if was_numpy else out


def upsample_targets(
    prominence: np.ndarray,
    spans: list[WordSpan] | list[tuple[int, int]],
    total_frames: int,
) -> np.ndarray:
    """Spread word prominence onto the frame grid by linear interpolation.

    Anchor points sit at word center frames; frames before the first and
    after the last anchor take the nearest anchor's value. Gap frames are
    interpolated like any other frame.
    """
    prominence = np.asarray(prominence, dtype=np.float64)
    bounds = _as_bounds(spans)
    if not bounds:
        raise SpanError("no word spans to upsample from")
    if len(prominence) != len(bounds):
        raise SpanError(
            f"{len(prominence)} prominence values for {len(bounds)} spans"
        )
    if total_frames < max(end for _, end in bounds):
        raise SpanError(
            f"frame count {total_frames} smaller than last span end "
            f"{max(end for _, end in bounds)}"
        )
    centers = np.array([(s + e - 1) // 2 for s, e in bounds], dtype=np.float64)
    return np.interp(np.arange(total_frames, dtype=np.float64), centers, prominence)


class ProminenceNet(nn.Module):
    """Convolutional prominence network; see the module docstring for layout."""

    def __init__(self, config: ModelConfig, in_channels: int = 80):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        k, pad = config.kernel_size, config.kernel_size // 2
        ch = config.channels
        self.encoder = nn.ModuleList(
            [
                nn.Conv1d(in_channels if i == 0 else ch, ch, k, padding=pad)
                for i in range(config.layers_per_stack)
            ]
        )
        self.decoder = nn.ModuleList(
            [
                nn.Conv1d(ch, 1 if i == config.layers_per_stack - 1 else ch, k, padding=pad)
                for i in range(config.layers_per_stack)
            ]
        )

    def _run(self, x: torch.Tensor, convs: list[nn.Module], last_is_output: bool) -> torch.Tensor:
        for i, conv in enumerate(convs):
            x = conv(x)
            if not (last_is_output and i == len(convs) - 1):
                x = torch.relu(x)
        return x

    def _encode(self, mel: torch.Tensor) -> torch.Tensor:
        """Encoder stack at frame resolution: [B, C_in, T] -> [B, C, T]."""
        return self._run(mel, list(self.encoder), last_is_output=False)

    def _decode(self, features: torch.Tensor) -> torch.Tensor:
        """Decoder stack: [B, C, L] -> [B, L] scalar scores."""
        return self._run(features, list(self.decoder), last_is_output=True).squeeze(1)

    def _bound(self, scores: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(scores) if self.config.loss == "mse" else scores

    def _check_input(self, mel: torch.Tensor) -> None:
        if mel.shape[-2] != self.in_channels:
            raise ConfigError(
                f"model expects {self.in_channels} input channels, "
                f"got {mel.shape[-2]}"
            )

    def frame_scores(self, mel: torch.Tensor) -> torch.Tensor:
        """Full 12-layer frame-resolution stack: [B, C_in, T] -> [B, T] raw scores.

        The MSE bound is applied by the caller after any downsampling, so
        sum-downsampled word scores are bounded too.
        """
        self._check_input(mel)
        return self._decode(self._encode(mel))

    def _segment_features(
        self, mel: torch.Tensor, spans_per_item: list[list[tuple[int, int]]]
    ) -> list[torch.Tensor]:
        """Prehoc path: encode each word segment in isolation.

        Segments are batched padded-to-max-length; activations are re-zeroed
        after every layer so each segment sees exactly the zeros same-padding
        would give it, keeping the receptive field confined to the segment.
        """
        segments = [
            mel[b, :, s:e]
            for b, bounds in enumerate(spans_per_item)
            for s, e in bounds
        ]
        lengths = [seg.shape[1] for seg in segments]
        max_len = max(lengths)
        batch = mel.new_zeros(len(segments), self.in_channels, max_len)
        for i, seg in enumerate(segments):
            batch[i, :, : seg.shape[1]] = seg
        mask = (
            torch.arange(max_len, device=mel.device)[None, None, :]
            < torch.tensor(lengths, device=mel.device)[:, None, None]
        ).to(mel.dtype)
        x = batch
        for conv in self.encoder:
            x = torch.relu(conv(x)) * mask
        # Aggregate each segment over its own (unpadded) length.
        word_vectors = [
            downsample(x[i, :, : lengths[i]], [(0, lengths[i])], self.config.method)[:, 0]
            for i in range(len(segments))
        ]
        features, cursor = [], 0
        for bounds in spans_per_item:
            features.append(torch.stack(word_vectors[cursor : cursor + len(bounds)], dim=1))
            cursor += len(bounds)
        return features

    def word_features(
        self, mel: torch.Tensor, spans: list[WordSpan] | list[tuple[int, int]]
    ) -> torch.Tensor:
        """Word-resolution features [C, W] ahead of the decoder.

        Only defined for the locations that build them (intermediate, prehoc).
        """
        self._check_input(mel)
        bounds = _as_bounds(spans)
        check_spans_bounds(bounds, mel.shape[-1])
        if self.config.location == "intermediate":
            encoded = self._encode(mel.unsqueeze(0))[0]
            return downsample(encoded, bounds, self.config.method)
        if self.config.location == "prehoc":
            return self._segment_features(mel.unsqueeze(0), [bounds])[0]
        raise ConfigError(
            f"word_features undefined for location {self.config.location!r}"
        )

    def forward(
        self, mel: torch.Tensor, spans: list[WordSpan] | list[tuple[int, int]]
    ) -> torch.Tensor:
        """Scores for one utterance: [W] per word, or [T] per frame (framewise)."""
        if not spans:
            raise SpanError("cannot run the model on an utterance with no words")
        self._check_input(mel)
        bounds = _as_bounds(spans)
        check_spans_bounds(bounds, mel.shape[-1])
        batch = mel.unsqueeze(0)
        if self.config.location == "framewise":
            return self._bound(self.frame_scores(batch)[0])
        if self.config.location == "posthoc":
            frames = self.frame_scores(batch)[0]
            return self._bound(
                downsample(frames.unsqueeze(0), bounds, self.config.method)[0]
            )
        features = self.word_features(mel, spans)
        return self._bound(self._decode(features.unsqueeze(0))[0])

    def forward_batch(
        self,
        mel: torch.Tensor,
        spans_per_item: list[list[tuple[int, int]]],
        frame_lengths: list[int],
    ) -> torch.Tensor:
        """Padded-batch scores: [B, T] for framewise, else [B, W_max].

        Mel padding (log floor, silence-like) feeds encoder context but is
        never aggregated into a word; word-axis padding is zero and must be
        masked out of the loss by the caller.
        """
        self._check_input(mel)
        if self.config.location == "framewise":
            return self._bound(self.frame_scores(mel))
        if self.config.location == "posthoc":
            frames = self.frame_scores(mel)
            per_item = [
                downsample(frames[b].unsqueeze(0), bounds, self.config.method)[0]
                for b, bounds in enumerate(spans_per_item)
            ]
            return self._bound(_pad_stack(per_item))
        if self.config.location == "intermediate":
            encoded = self._encode(mel)
            features = [
                downsample(encoded[b], bounds, self.config.method)
                for b, bounds in enumerate(spans_per_item)
            ]
        else:
            features = self._segment_features(mel, spans_per_item)
        max_words = max(f.shape[1] for f in features)
        stacked = mel.new_zeros(len(features), self.config.channels, max_words)
        for b, f in enumerate(features):
            stacked[b, :, : f.shape[1]] = f
        return self._bound(self._decode(stacked))

    @torch.no_grad()
    def predict_prominence(
        self, mel: torch.Tensor, spans: list[WordSpan] | list[tuple[int, int]]
    ) -> np.ndarray:
        """Per-word prominence in [0, 1] for one utterance."""
        scores = self.forward(mel, spans)
        if self.config.location == "framewise":
            scores = downsample(scores.unsqueeze(0), _as_bounds(spans), self.config.method)[0]
        if self.config.loss == "bce":
            scores = torch.sigmoid(scores)
        else:
            # Summing bounded frame scores can exceed 1 for framewise+sum.
            scores = scores.clamp(0.0, 1.0)
        return scores.detach().cpu().numpy()


def _pad_stack(items: list[torch.Tensor]) -> torch.Tensor:
    max_len = max(item.shape[0] for item in items)
    out = items[0].new_zeros(len(items), max_len)
    for i, item in enumerate(items):
        out[i, : item.shape[0]] = item
    return out


def check_spans_bounds(bounds: list[tuple[int, int]], total: int) -> None:
    for start, end in bounds:
        if start < 0 or end > total or start >= end:
            raise SpanError(f"span [{start}, {end}) outside features [0, {total})")


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(
    path: str | Path,
    model: ProminenceNet,
    step: int,
    feature_config_hash: str,
    extra: dict | None = None,
) -> None:
    """Self-describing checkpoint: config, feature hash, step, parameters."""
    payload = {
        "model_config": model.config.to_dict(),
        "in_channels": model.in_channels,
        "step": step,
        "feature_config_hash": feature_config_hash,
        "state_dict": model.state_dict(),
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[ProminenceNet, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = ModelConfig.from_dict(payload["model_config"])
    model = ProminenceNet(config, in_channels=payload["in_channels"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    metadata = {k: v for k, v in payload.items() if k != "state_dict"}
    return model, metadata
