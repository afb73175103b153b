"""Input validation helpers shared by the estimators and core operations."""

from __future__ import annotations

import numpy as np

from .corpus import WordSpan
from .errors import LossError, MetricError, SpanError


def check_spans(spans: list[WordSpan], total_frames: int) -> None:
    if not spans:
        raise SpanError("no word spans provided")
    for span in spans:
        if span.start_frame < 0 or span.end_frame > total_frames:
            raise SpanError(
                f"span {span.token!r} [{span.start_frame}, {span.end_frame}) "
                f"outside [0, {total_frames})"
            )


def check_unit_interval(values: np.ndarray, name: str) -> None:
    values = np.asarray(values)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise LossError(f"{name} outside [0, 1]: range "
                        f"[{values.min():.4g}, {values.max():.4g}]")


def check_equal_length(a: np.ndarray, b: np.ndarray) -> None:
    if len(a) != len(b):
        raise MetricError(f"length mismatch: {len(a)} vs {len(b)}")
