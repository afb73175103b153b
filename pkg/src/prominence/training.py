"""Optimization loop: variable-size batching, masked losses, periodic
validation with best-checkpoint retention by validation Pearson."""

from __future__ import annotations

import copy
import math
import random
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import (
    BatchingError,
    ConfigError,
    LossError,
    MetricError,
    TrainingError,
)
from .evaluation import bce_metric, pearson
from .features import DEFAULT_MEL, MelConfig
from .model import ModelConfig, ProminenceNet, upsample_targets
from .prepare import PreparedUtterance
from .utils import config_hash, write_jsonl


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_steps: int = 6000
    validate_every: int = 100
    max_frames_per_batch: int = 75000
    seed: int = 0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.validate_every <= 0:
            raise ConfigError("learning_rate and validate_every must be positive")
        if self.max_steps < 0 or self.max_frames_per_batch <= 0:
            raise ConfigError("max_steps and max_frames_per_batch must be positive")
        if self.max_steps % self.validate_every != 0:
            raise ConfigError(
                f"validate_every ({self.validate_every}) must divide "
                f"max_steps ({self.max_steps})"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def _item_frames(item) -> tuple[str, int]:
    if isinstance(item, PreparedUtterance):
        return item.id, item.n_frames
    identifier, frames = item
    return str(identifier), int(frames)


def make_batches(items: list, max_frames: int, seed: int) -> list[list]:
    """Greedy variable-size batching of shuffled utterances.

    Fills each batch until adding the next utterance would push the total
    frame count past ``max_frames``; every utterance appears exactly once.
    """
    for item in items:
        identifier, frames = _item_frames(item)
        if frames > max_frames:
            raise BatchingError(
                f"utterance {identifier!r} has {frames} frames, "
                f"over the {max_frames}-frame batch limit"
            )
    shuffled = sorted(items, key=lambda item: _item_frames(item)[0])
    random.Random(seed).shuffle(shuffled)
    batches: list[list] = []
    current: list = []
    current_frames = 0
    for item in shuffled:
        frames = _item_frames(item)[1]
        if current and current_frames + frames > max_frames:
            batches.append(current)
            current, current_frames = [], 0
        current.append(item)
        current_frames += frames
    if current:
        batches.append(current)
    return batches


def bce_loss(
    scores: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Masked binary cross-entropy against soft targets; scores are logits."""
    _check_loss_inputs(scores, targets, mask)
    elementwise = F.binary_cross_entropy_with_logits(scores, targets, reduction="none")
    return (elementwise * mask).sum() / mask.sum()


def mse_loss(
    scores: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Masked mean squared error; scores must already be bounded to [0, 1]."""
    _check_loss_inputs(scores, targets, mask)
    return (((scores - targets) ** 2) * mask).sum() / mask.sum()


def _check_loss_inputs(scores, targets, mask) -> None:
    if scores.shape != targets.shape or scores.shape != mask.shape:
        raise LossError(
            f"shape mismatch: scores {tuple(scores.shape)}, "
            f"targets {tuple(targets.shape)}, mask {tuple(mask.shape)}"
        )
    masked = targets[mask > 0]
    if masked.numel() and (masked.min() < 0.0 or masked.max() > 1.0):
        raise LossError("targets outside [0, 1]")
    if mask.sum() == 0:
        raise LossError("empty mask")


@dataclass
class Batch:
    ids: list[str]
    mel: torch.Tensor  # [B, C, T_max], padded with the mel log floor
    bounds: list[list[tuple[int, int]]]
    frame_lengths: list[int]
    targets: torch.Tensor  # [B, W_max] or [B, T_max] for framewise
    mask: torch.Tensor


def collate(
    items: list[PreparedUtterance],
    framewise: bool,
    pad_value: float,
) -> Batch:
    max_frames = max(item.n_frames for item in items)
    max_words = max(item.n_words for item in items)
    mel = torch.full((len(items), items[0].mel.shape[0], max_frames), pad_value)
    frame_lengths = []
    bounds = []
    if framewise:
        targets = torch.zeros(len(items), max_frames)
        mask = torch.zeros(len(items), max_frames)
    else:
        targets = torch.zeros(len(items), max_words)
        mask = torch.zeros(len(items), max_words)
    for b, item in enumerate(items):
        if item.target is None:
            raise TrainingError(f"utterance {item.id!r} has no prominence target")
        mel[b, :, : item.n_frames] = torch.from_numpy(item.mel)
        frame_lengths.append(item.n_frames)
        bounds.append(item.bounds)
        if framewise:
            frame_target = upsample_targets(item.target, item.spans, item.n_frames)
            targets[b, : item.n_frames] = torch.from_numpy(frame_target.astype(np.float32))
            mask[b, : item.n_frames] = 1.0
        else:
            targets[b, : item.n_words] = torch.from_numpy(item.target)
            mask[b, : item.n_words] = 1.0
    return Batch([item.id for item in items], mel, bounds, frame_lengths, targets, mask)


@dataclass
class TrainResult:
    model: ProminenceNet
    log: list[dict] = field(default_factory=list)
    best_step: int = 0
    best_val_pearson: float | None = None

    def save(self, path, feature_config: MelConfig = DEFAULT_MEL, extra: dict | None = None):
        from .model import save_checkpoint

        metadata = {"best_val_pearson": self.best_val_pearson, "best_step": self.best_step}
        if extra:
            metadata.update(extra)
        save_checkpoint(path, self.model, self.best_step, feature_config.hash, metadata)


def _validate(
    model: ProminenceNet, items: list[PreparedUtterance]
) -> tuple[float | None, float]:
    model.eval()
    predictions, targets = [], []
    for item in items:
        scores = model.predict_prominence(torch.from_numpy(item.mel), item.spans)
        predictions.append(scores)
        targets.append(item.target)
    model.train()
    pred = np.concatenate(predictions).astype(np.float64)
    target = np.concatenate(targets).astype(np.float64)
    bce = bce_metric(pred, target)
    try:
        correlation = pearson(pred, target)
    except MetricError:
        correlation = None  # constant predictions early in training
    return correlation, bce


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_items: list[PreparedUtterance],
    val_items: list[PreparedUtterance],
    mel_config: MelConfig = DEFAULT_MEL,
    stop_fn=None,
    log_path=None,
) -> TrainResult:
    """Run the optimization loop and return the best checkpoint by validation
    Pearson, plus the validation log.

    ``stop_fn(entry) -> bool`` may end training early after a validation
    event (used by studies that only need a target quality); by default the
    loop always runs ``max_steps`` steps.
    """
    if not train_items or not val_items:
        raise TrainingError("train and validation partitions must be non-empty")
    torch.manual_seed(train_config.seed)
    in_channels = train_items[0].mel.shape[0]
    model = ProminenceNet(model_config, in_channels=in_channels)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_config.learning_rate,
        betas=train_config.adam_betas,
        eps=train_config.adam_eps,
    )
    pad_value = math.log(mel_config.log_floor)
    framewise = model_config.location == "framewise"
    loss_fn = bce_loss if model_config.loss == "bce" else mse_loss

    log: list[dict] = []
    best_state = copy.deepcopy(model.state_dict())
    best_pearson: float | None = None
    best_step = 0
    step = 0
    epoch = 0
    run_hash = config_hash(
        {"model": model_config.to_dict(), "train": train_config.to_dict()}
    )

    stop = train_config.max_steps == 0
    while not stop:
        batches = make_batches(
            train_items, train_config.max_frames_per_batch, train_config.seed + epoch
        )
        for items in batches:
            batch = collate(items, framewise, pad_value)
            scores = model.forward_batch(batch.mel, batch.bounds, batch.frame_lengths)
            # Framewise: loss over all real frames, gaps included; otherwise
            # over real words. Padding is masked out either way.
            loss = loss_fn(scores, batch.targets, batch.mask)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at step {step + 1}, batch {batch.ids}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            step += 1

            if step % train_config.validate_every == 0:
                val_pearson, val_bce = _validate(model, val_items)
                entry = {
                    "step": step,
                    "train_loss": float(loss.item()),
                    "val_pearson": val_pearson,
                    "val_bce": val_bce,
                    "config_hash": run_hash,
                }
                log.append(entry)
                if val_pearson is not None and (
                    best_pearson is None or val_pearson > best_pearson
                ):
                    best_pearson = val_pearson
                    best_step = step
                    best_state = copy.deepcopy(model.state_dict())
                if stop_fn is not None and stop_fn(entry):
                    stop = True
            if step >= train_config.max_steps:
                stop = True
            if stop:
                break
        epoch += 1

    model.load_state_dict(best_state)
    model.eval()
    if log_path is not None:
        write_jsonl(log_path, log)
    return TrainResult(model, log, best_step, best_pearson)
