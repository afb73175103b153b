"""Crowdsourced binary emphasis annotations: aggregation, quality control,
agreement statistics, and the one-parameter logistic (Rasch) agreement model.

Each annotator marks every word of an utterance as emphasized (1) or not (0).
The per-word prominence target is the mean of those binary marks: the
maximum-likelihood estimate of the Bernoulli parameter behind the judgments.
"""

from __future__ import annotations

import csv
import json
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import AggregationError, BatchError, OverlapError
from .corpus import Utterance

BATCH_SIZE = 20
# An annotator fails the bot filter when >2/3 of words are marked emphasized
# in at least this many utterances of a 20-utterance batch.
BOT_OVERMARK_UTTERANCES = 8


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's binary emphasis vector for one utterance."""

    annotator_id: str
    utterance_id: str
    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise AggregationError(
                f"empty label vector for utterance {self.utterance_id!r}"
            )
        if any(label not in (0, 1) for label in self.labels):
            raise AggregationError(
                f"labels must be binary, got {self.labels} "
                f"for utterance {self.utterance_id!r}"
            )

    @property
    def emphasized_fraction(self) -> float:
        return sum(self.labels) / len(self.labels)


@dataclass
class ProminenceTarget:
    """Per-word prominence in [0, 1]: the mean of binary annotations."""

    utterance_id: str
    prominence: np.ndarray
    annotator_count: int

    def __post_init__(self) -> None:
        self.prominence = np.asarray(self.prominence, dtype=np.float64)
        if self.annotator_count < 1:
            raise AggregationError("annotator_count must be >= 1")


def aggregate_prominence(records: list[AnnotationRecord]) -> ProminenceTarget:
    """Average the binary emphasis vectors of one utterance's annotators."""
    if not records:
        raise AggregationError("no records to aggregate")
    utterance_id = records[0].utterance_id
    n_words = len(records[0].labels)
    for record in records:
        if record.utterance_id != utterance_id:
            raise AggregationError(
                f"mixed utterances: {record.utterance_id!r} vs {utterance_id!r}"
            )
        if len(record.labels) != n_words:
            raise AggregationError(
                f"utterance {utterance_id!r}: label length {len(record.labels)} "
                f"!= {n_words}"
            )
    matrix = np.array([record.labels for record in records], dtype=np.float64)
    return ProminenceTarget(utterance_id, matrix.mean(axis=0), len(records))


def is_overmarked(record: AnnotationRecord) -> bool:
    # Exact rational comparison: emphasized / total > 2/3.
    return 3 * sum(record.labels) > 2 * len(record.labels)


def passes_bot_filter(batch: list[AnnotationRecord]) -> bool:
    """Apply the over-marking rule to one annotator's 20-utterance batch."""
    if len(batch) != BATCH_SIZE:
        raise BatchError(f"batch must contain {BATCH_SIZE} records, got {len(batch)}")
    annotators = {record.annotator_id for record in batch}
    if len(annotators) != 1:
        raise BatchError(f"batch mixes annotators: {sorted(annotators)}")
    overmarked = sum(is_overmarked(record) for record in batch)
    return overmarked < BOT_OVERMARK_UTTERANCES


def cohen_kappa(a: list[AnnotationRecord], b: list[AnnotationRecord]) -> float:
    """Two-rater Cohen kappa over the word labels of shared utterances.

    Returns 0 when the chance-agreement term is 1 (degenerate marginals).
    """
    by_utt_a = {record.utterance_id: record for record in a}
    by_utt_b = {record.utterance_id: record for record in b}
    shared = sorted(set(by_utt_a) & set(by_utt_b))
    if not shared:
        raise OverlapError("annotators share no utterance")
    labels_a: list[int] = []
    labels_b: list[int] = []
    for utt_id in shared:
        rec_a, rec_b = by_utt_a[utt_id], by_utt_b[utt_id]
        if len(rec_a.labels) != len(rec_b.labels):
            raise AggregationError(f"utterance {utt_id!r}: label length mismatch")
        labels_a.extend(rec_a.labels)
        labels_b.extend(rec_b.labels)
    va = np.array(labels_a, dtype=np.float64)
    vb = np.array(labels_b, dtype=np.float64)
    observed = float(np.mean(va == vb))
    pa, pb = va.mean(), vb.mean()
    expected = pa * pb + (1.0 - pa) * (1.0 - pb)
    if expected >= 1.0 - 1e-12:
        return 0.0
    return (observed - expected) / (1.0 - expected)


def pairwise_kappa_summary(
    records: list[AnnotationRecord],
) -> dict[str, float | int]:
    """Average pairwise kappa over annotators with >= 1 shared utterance.

    Reports both the per-pair uniform average and the overlap-weighted
    average (weights = number of shared words), since low-overlap pairs
    dominate the uniform mean.
    """
    by_annotator: dict[str, list[AnnotationRecord]] = {}
    for record in records:
        by_annotator.setdefault(record.annotator_id, []).append(record)
    annotators = sorted(by_annotator)
    kappas, weights = [], []
    for i, first in enumerate(annotators):
        utts_first = {r.utterance_id: r for r in by_annotator[first]}
        for second in annotators[i + 1 :]:
            shared = [
                r for r in by_annotator[second] if r.utterance_id in utts_first
            ]
            if not shared:
                continue
            kappas.append(cohen_kappa(by_annotator[first], by_annotator[second]))
            weights.append(sum(len(r.labels) for r in shared))
    if not kappas:
        raise OverlapError("no annotator pair shares an utterance")
    kappas_arr = np.array(kappas)
    weights_arr = np.array(weights, dtype=np.float64)
    return {
        "uniform_mean": float(kappas_arr.mean()),
        "overlap_weighted_mean": float(
            np.average(kappas_arr, weights=weights_arr)
        ),
        "n_pairs": len(kappas),
    }


@dataclass
class RaschModel:
    """1PL item-response model: p(label=1) = sigmoid(theta_annotator - b_item).

    Items are (utterance, word index) pairs. Fitted with mean(b) = 0 to fix
    the translation gauge.
    """

    abilities: dict[str, float]
    difficulties: dict[tuple[str, int], float]

    def predict_proba(self, annotator_id: str, item: tuple[str, int]) -> float:
        return float(
            expit(self.abilities[annotator_id] - self.difficulties[item])
        )

    def shifted(self, constant: float) -> "RaschModel":
        """Gauge-shifted copy: predictions are invariant under this shift."""
        return RaschModel(
            {a: theta + constant for a, theta in self.abilities.items()},
            {i: b + constant for i, b in self.difficulties.items()},
        )


@dataclass
class RaschFit:
    model: RaschModel
    heldout_accuracy: float
    heldout_majority_accuracy: float
    n_train: int
    n_heldout: int
    converged: bool = True
    notes: list[str] = field(default_factory=list)


def _rasch_cells(
    records: list[AnnotationRecord],
) -> list[tuple[str, tuple[str, int], int]]:
    cells = []
    for record in records:
        for word_index, label in enumerate(record.labels):
            cells.append(
                (record.annotator_id, (record.utterance_id, word_index), label)
            )
    return cells


def fit_rasch(
    records: list[AnnotationRecord],
    heldout_fraction: float = 0.1,
    seed: int = 0,
    l2: float = 1e-4,
) -> RaschFit:
    """Fit the 1PL model by penalized maximum likelihood; report heldout accuracy.

    The heldout split is a uniform random fraction of (annotator, item)
    cells. Accuracy thresholds the predicted probability at 0.5. The small
    L2 penalty keeps parameters finite for annotators with constant labels.
    """
    annotators = sorted({record.annotator_id for record in records})
    if len(annotators) < 2:
        raise AggregationError("Rasch fit needs at least 2 annotators")
    cells = _rasch_cells(records)
    item_annotators: dict[tuple[str, int], set[str]] = {}
    for annotator, item, _ in cells:
        item_annotators.setdefault(item, set()).add(annotator)
    if not any(len(who) >= 2 for who in item_annotators.values()):
        raise OverlapError("no item is annotated by more than one annotator")

    labels_seen = {label for _, _, label in cells}
    notes = []
    if len(labels_seen) == 1:
        warnings.warn(
            "all annotation labels identical; Rasch fit is degenerate",
            stacklevel=2,
        )
        notes.append("degenerate: all labels identical")

    if heldout_fraction > 0.0:
        rng = random.Random(seed)
        order = list(range(len(cells)))
        rng.shuffle(order)
        n_heldout = max(1, int(len(cells) * heldout_fraction))
        heldout_idx = set(order[:n_heldout])
        train = [cell for i, cell in enumerate(cells) if i not in heldout_idx]
        heldout = [cells[i] for i in sorted(heldout_idx)]
    else:
        train, heldout = cells, []

    items = sorted({item for _, item, _ in cells})
    annotator_index = {a: i for i, a in enumerate(annotators)}
    item_index = {it: i for i, it in enumerate(items)}
    a_idx = np.array([annotator_index[a] for a, _, _ in train])
    i_idx = np.array([item_index[it] for _, it, _ in train])
    y = np.array([label for _, _, label in train], dtype=np.float64)
    n_ann, n_items = len(annotators), len(items)

    def objective(params: np.ndarray) -> tuple[float, np.ndarray]:
        theta, b = params[:n_ann], params[n_ann:]
        z = theta[a_idx] - b[i_idx]
        # log(1 + e^z) - y z, computed stably
        nll = np.sum(np.logaddexp(0.0, z) - y * z)
        residual = expit(z) - y
        grad_theta = np.bincount(a_idx, weights=residual, minlength=n_ann)
        grad_b = -np.bincount(i_idx, weights=residual, minlength=n_items)
        nll += l2 * (np.sum(theta**2) + np.sum(b**2))
        grad = np.concatenate([grad_theta + 2 * l2 * theta, grad_b + 2 * l2 * b])
        return nll, grad

    result = minimize(
        objective,
        np.zeros(n_ann + n_items),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500},
    )
    theta, b = result.x[:n_ann], result.x[n_ann:]
    # Gauge fix: mean item difficulty is zero.
    shift = b.mean()
    theta, b = theta - shift, b - shift

    model = RaschModel(
        abilities={a: float(theta[annotator_index[a]]) for a in annotators},
        difficulties={it: float(b[item_index[it]]) for it in items},
    )
    if heldout:
        heldout_labels = np.array([label for _, _, label in heldout])
        predictions = np.array(
            [model.predict_proba(a, it) > 0.5 for a, it, _ in heldout]
        )
        accuracy = float(np.mean(predictions == heldout_labels))
        majority = float(max(heldout_labels.mean(), 1.0 - heldout_labels.mean()))
    else:
        accuracy = majority = float("nan")
    return RaschFit(
        model=model,
        heldout_accuracy=accuracy,
        heldout_majority_accuracy=float(majority),
        n_train=len(train),
        n_heldout=len(heldout),
        converged=bool(result.success),
        notes=notes,
    )


def rasch_heldout_accuracy(
    model: RaschModel, heldout: list[tuple[str, tuple[str, int], int]]
) -> float:
    """Accuracy of a (possibly gauge-shifted) model on explicit cells."""
    predictions = np.array(
        [model.predict_proba(a, it) > 0.5 for a, it, _ in heldout]
    )
    labels = np.array([label for _, _, label in heldout])
    return float(np.mean(predictions == labels))


def read_annotation_file(path: str | Path) -> list[AnnotationRecord]:
    """Read one utterance's annotation JSON: {utterance_id, annotations: [...]}. """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    utterance_id = str(payload["utterance_id"])
    return [
        AnnotationRecord(
            annotator_id=str(item["annotator"]),
            utterance_id=utterance_id,
            labels=tuple(int(v) for v in item["labels"]),
        )
        for item in payload["annotations"]
    ]


def write_annotation_file(
    path: str | Path, utterance_id: str, records: list[AnnotationRecord]
) -> None:
    payload = {
        "utterance_id": utterance_id,
        "annotations": [
            {"annotator": record.annotator_id, "labels": list(record.labels)}
            for record in records
            if record.utterance_id == utterance_id
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def exclude_filtered_annotators(
    records: list[AnnotationRecord],
) -> tuple[list[AnnotationRecord], set[str]]:
    """Drop all records of annotators that fail the bot filter on any full batch.

    Records are grouped per annotator in submission order into consecutive
    20-utterance batches; trailing partial batches are not filtered.
    """
    by_annotator: dict[str, list[AnnotationRecord]] = {}
    for record in records:
        by_annotator.setdefault(record.annotator_id, []).append(record)
    blocked = set()
    for annotator, recs in by_annotator.items():
        for start in range(0, len(recs) - BATCH_SIZE + 1, BATCH_SIZE):
            if not passes_bot_filter(recs[start : start + BATCH_SIZE]):
                blocked.add(annotator)
                break
    kept = [record for record in records if record.annotator_id not in blocked]
    return kept, blocked


def export_targets_csv(
    path: str | Path,
    targets: list[ProminenceTarget],
    utterances: dict[str, Utterance] | None = None,
) -> None:
    """Write (utterance_id, word_index, token, prominence, annotator_count) rows."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["utterance_id", "word_index", "token", "prominence", "annotator_count"]
        )
        for target in targets:
            tokens = (
                utterances[target.utterance_id].tokens
                if utterances and target.utterance_id in utterances
                else [""] * len(target.prominence)
            )
            for index, value in enumerate(target.prominence):
                writer.writerow(
                    [
                        target.utterance_id,
                        index,
                        tokens[index],
                        f"{value:.6f}",
                        target.annotator_count,
                    ]
                )


def read_targets_csv(path: str | Path) -> list[ProminenceTarget]:
    rows: dict[str, list[tuple[int, float, int]]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(
            line for line in handle if not line.startswith("#")
        ):
            rows.setdefault(row["utterance_id"], []).append(
                (
                    int(row["word_index"]),
                    float(row["prominence"]),
                    int(row["annotator_count"]),
                )
            )
    targets = []
    for utterance_id, entries in rows.items():
        entries.sort()
        targets.append(
            ProminenceTarget(
                utterance_id=utterance_id,
                prominence=np.array([value for _, value, _ in entries]),
                annotator_count=entries[0][2],
            )
        )
    return targets
