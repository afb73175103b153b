"""Evaluation metrics (Pearson correlation, binary cross-entropy) pooled
over all words of an evaluation set, and report emission."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import MetricError
from .model import ProminenceNet
from .prepare import PreparedUtterance
from .validation import check_equal_length, check_unit_interval

PROB_CLAMP = 1e-6


@dataclass
class EvalReport:
    pearson: float
    bce: float
    word_count: int
    dataset_id: str
    skipped_utterances: int = 0
    config_hash: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def pearson(pred: np.ndarray, target: np.ndarray) -> float:
    """Sample Pearson correlation pooled over all words."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    check_equal_length(pred, target)
    if len(pred) < 2:
        raise MetricError("Pearson correlation needs at least 2 values")
    pred_centered = pred - pred.mean()
    target_centered = target - target.mean()
    denom = np.sqrt(np.sum(pred_centered**2) * np.sum(target_centered**2))
    if denom == 0.0:
        raise MetricError("Pearson correlation undefined for a constant vector")
    return float(np.dot(pred_centered, target_centered) / denom)


def bce_metric(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean binary cross-entropy between probabilities and soft targets."""
    pred = np.clip(np.asarray(pred, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    target = np.asarray(target, dtype=np.float64)
    check_equal_length(pred, target)
    check_unit_interval(target, "targets")
    return float(
        np.mean(-(target * np.log(pred) + (1.0 - target) * np.log(1.0 - pred)))
    )


def evaluate(
    model: ProminenceNet,
    items: list[PreparedUtterance],
    dataset_id: str = "",
    config_hash: str = "",
) -> EvalReport:
    """Run inference per utterance, pool all words, return both metrics.

    Utterances without targets are skipped (counted in the report).
    """
    predictions, targets = [], []
    skipped = 0
    for item in items:
        if item.target is None:
            skipped += 1
            continue
        scores = model.predict_prominence(torch.from_numpy(item.mel), item.spans)
        predictions.append(scores)
        targets.append(item.target)
    if skipped:
        warnings.warn(
            f"skipped {skipped} utterance(s) without prominence targets",
            stacklevel=2,
        )
    if not predictions:
        raise MetricError("no annotated utterances to evaluate")
    pred = np.concatenate(predictions).astype(np.float64)
    target = np.concatenate(targets).astype(np.float64)
    return EvalReport(
        pearson=pearson(pred, target),
        bce=bce_metric(pred, target),
        word_count=len(pred),
        dataset_id=dataset_id,
        skipped_utterances=skipped,
        config_hash=config_hash,
    )


def render_table(reports: list[EvalReport], title: str = "Model") -> str:
    """Aligned plain-text comparison table of evaluation reports."""
    header = f"{title:<24} {'PC':>8} {'BCE':>8} {'words':>8}"
    rows = [header, "-" * len(header)]
    for report in reports:
        rows.append(
            f"{report.dataset_id:<24} {report.pearson:>8.3f} "
            f"{report.bce:>8.3f} {report.word_count:>8d}"
        )
    return "\n".join(rows)


def write_report(path: str | Path, report: EvalReport) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
