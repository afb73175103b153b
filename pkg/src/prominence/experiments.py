"""Experiment harness: the downsampling ablation grid, dataset-size scaling,
annotator-redundancy trade-off, and teacher-student self-training.

Every study emits machine-readable JSON-lines sufficient to regenerate its
table or figure without retraining, plus optional rendered curves.
"""

from __future__ import annotations

import dataclasses
import json
import random
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import torch

from .annotations import AnnotationRecord, aggregate_prominence
from .errors import StudyError
from .evaluation import evaluate, pearson
from .model import LOCATIONS, METHODS, ModelConfig, ProminenceNet
from .prepare import PreparedUtterance
from .training import TrainConfig, train
from .utils import write_jsonl


def run_jobs(jobs: list[tuple[str, callable]], max_workers: int = 1) -> dict:
    """Run independent study jobs; failures are recorded, not raised."""
    results: dict[str, dict] = {}

    def _run(name, fn):
        try:
            return name, {"status": "ok", "result": fn()}
        except Exception as exc:  # failed cell: record and continue
            return name, {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    if max_workers <= 1:
        for name, fn in jobs:
            key, value = _run(name, fn)
            results[key] = value
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for key, value in pool.map(lambda job: _run(*job), jobs):
                results[key] = value
    return results


def _train_and_eval(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_items,
    val_items,
    eval_items,
    stop_fn=None,
) -> dict:
    result = train(model_config, train_config, train_items, val_items, stop_fn=stop_fn)
    report = evaluate(result.model, eval_items, dataset_id="eval")
    return {
        "pearson": report.pearson,
        "bce": report.bce,
        "best_val_pearson": result.best_val_pearson,
        "best_step": result.best_step,
        "log": result.log,
    }


def ablation_grid(
    train_items: list[PreparedUtterance],
    val_items: list[PreparedUtterance],
    eval_items: list[PreparedUtterance],
    train_config: TrainConfig,
    seeds: tuple[int, ...] = (0, 1, 2),
    loss: str = "bce",
    out_dir: str | Path | None = None,
    max_workers: int = 1,
) -> dict:
    """All (location x method) cells, each averaged over seeds.

    Failed cells are recorded as missing and the grid continues.
    """
    jobs = []
    for location in LOCATIONS:
        for method in METHODS:
            for seed in seeds:
                model_config = ModelConfig(location=location, method=method, loss=loss)
                config = dataclasses.replace(train_config, seed=seed)
                jobs.append(
                    (
                        f"{location}/{method}/seed{seed}",
                        lambda mc=model_config, tc=config: _train_and_eval(
                            mc, tc, train_items, val_items, eval_items
                        ),
                    )
                )
    outcomes = run_jobs(jobs, max_workers)

    records, table = [], {loc: {} for loc in LOCATIONS}
    for location in LOCATIONS:
        for method in METHODS:
            values = []
            for seed in seeds:
                outcome = outcomes[f"{location}/{method}/seed{seed}"]
                record = {"location": location, "method": method, "seed": seed}
                if outcome["status"] == "ok":
                    record.update(
                        {k: v for k, v in outcome["result"].items() if k != "log"}
                    )
                    values.append(outcome["result"]["pearson"])
                else:
                    record["error"] = outcome["error"]
                records.append(record)
            table[location][method] = float(np.mean(values)) if values else None

    results = {"cells": records, "table": table, "seeds": list(seeds)}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl(out_dir / "ablation_cells.jsonl", records)
        (out_dir / "ablation_table.json").write_text(
            json.dumps(table, indent=2), encoding="utf-8"
        )
    return results


def nested_subsets(ids: list[str], sizes: list[int], seed: int = 0) -> dict[int, list[str]]:
    """Seeded nested subsets: each size is a prefix of the next one's set."""
    if max(sizes) > len(ids):
        raise StudyError(
            f"largest size {max(sizes)} exceeds available {len(ids)} utterances"
        )
    order = sorted(ids)
    random.Random(seed).shuffle(order)
    return {size: order[:size] for size in sorted(sizes)}


def _split_train_val(
    items: list[PreparedUtterance], val_fraction: float, seed: int
) -> tuple[list[PreparedUtterance], list[PreparedUtterance]]:
    n_val = max(1, int(len(items) * val_fraction))
    if len(items) <= n_val:
        raise StudyError(f"{len(items)} utterances cannot spare {n_val} for validation")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    val_idx = set(order[:n_val])
    return (
        [it for i, it in enumerate(items) if i not in val_idx],
        [items[i] for i in sorted(val_idx)],
    )


def scaling_study(
    annotated_items: list[PreparedUtterance],
    sizes: list[int],
    eval_items: list[PreparedUtterance],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seeds: tuple[int, ...] = (0, 1, 2),
    subset_seed: int = 0,
    val_fraction: float = 0.1,
    out_dir: str | Path | None = None,
    stop_fn=None,
) -> dict:
    """Pearson as a function of dataset size over seeded nested partitions."""
    by_id = {item.id: item for item in annotated_items}
    subsets = nested_subsets(list(by_id), sizes, subset_seed)
    records = []
    for size in sorted(sizes):
        items = [by_id[utt_id] for utt_id in subsets[size]]
        for seed in seeds:
            train_items, val_items = _split_train_val(items, val_fraction, seed)
            config = dataclasses.replace(train_config, seed=seed)
            outcome = _train_and_eval(
                model_config, config, train_items, val_items, eval_items, stop_fn
            )
            records.append(
                {
                    "size": size,
                    "seed": seed,
                    "pearson": outcome["pearson"],
                    "bce": outcome["bce"],
                    "best_step": outcome["best_step"],
                }
            )
    curve = {
        size: float(np.mean([r["pearson"] for r in records if r["size"] == size]))
        for size in sorted(sizes)
    }
    results = {"runs": records, "curve": curve, "subset_ids": subsets}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl(out_dir / "scaling_runs.jsonl", records)
        (out_dir / "scaling_curve.json").write_text(
            json.dumps(curve, indent=2), encoding="utf-8"
        )
        plot_curve(
            {str(k): v for k, v in curve.items()},
            "utterances",
            "Pearson",
            out_dir / "scaling.png",
        )
    return results


def redundancy_targets(
    annotations: dict[str, list[AnnotationRecord]],
    n_utterances: int,
    annotators_per_utterance: int,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Targets aggregated from exactly k annotators for n seeded-random
    utterances drawn from the stratum with >= k annotations each."""
    k = annotators_per_utterance
    eligible = sorted(
        utt_id
        for utt_id, records in annotations.items()
        if len({r.annotator_id for r in records}) >= k
    )
    if len(eligible) < n_utterances:
        raise StudyError(
            f"need {n_utterances} utterances with >= {k} annotations, "
            f"found {len(eligible)}"
        )
    rng = random.Random(seed)
    chosen = rng.sample(eligible, n_utterances)
    targets = {}
    for utt_id in chosen:
        records = sorted(annotations[utt_id], key=lambda r: r.annotator_id)
        subset = rng.sample(records, k)
        targets[utt_id] = aggregate_prominence(subset).prominence
    return targets


def redundancy_study(
    items_by_id: dict[str, PreparedUtterance],
    annotations: dict[str, list[AnnotationRecord]],
    budget_configs: list[tuple[int, int]],
    eval_items: list[PreparedUtterance],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seeds: tuple[int, ...] = (0, 1, 2),
    selection_seed: int = 0,
    val_fraction: float = 0.1,
    out_dir: str | Path | None = None,
    stop_fn=None,
) -> dict:
    """Fixed annotation budget split between corpus size and redundancy.

    For each (n_utterances, annotators) configuration the study reports the
    final Pearson and a convergence proxy: the first validation step whose
    Pearson reaches 99% of the run's best.
    """
    records = []
    for n_utts, k in budget_configs:
        targets = redundancy_targets(annotations, n_utts, k, selection_seed)
        items = []
        for utt_id, prominence in targets.items():
            base = items_by_id[utt_id]
            items.append(
                PreparedUtterance(
                    base.id, base.mel, base.spans, prominence.astype(np.float32)
                )
            )
        for seed in seeds:
            train_items, val_items = _split_train_val(items, val_fraction, seed)
            config = dataclasses.replace(train_config, seed=seed)
            outcome = _train_and_eval(
                model_config, config, train_items, val_items, eval_items, stop_fn
            )
            records.append(
                {
                    "n_utterances": n_utts,
                    "annotators": k,
                    "seed": seed,
                    "pearson": outcome["pearson"],
                    "best_val_pearson": outcome["best_val_pearson"],
                    "convergence_step": convergence_step(outcome["log"]),
                }
            )
    results = {"runs": records}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl(out_dir / "redundancy_runs.jsonl", records)
        curve = {
            f"{k}": float(
                np.mean(
                    [r["pearson"] for r in records if r["annotators"] == k]
                )
            )
            for _, k in budget_configs
        }
        plot_curve(curve, "annotators per utterance", "Pearson", out_dir / "redundancy.png")
    return results


def convergence_step(log: list[dict], fraction: float = 0.99) -> int | None:
    """First validation step whose Pearson reaches ``fraction`` of the best."""
    values = [e for e in log if e.get("val_pearson") is not None]
    if not values:
        return None
    best = max(e["val_pearson"] for e in values)
    for entry in values:
        if entry["val_pearson"] >= fraction * best:
            return entry["step"]
    return None


def pseudo_label(
    teacher: ProminenceNet, items: list[PreparedUtterance]
) -> list[PreparedUtterance]:
    labeled = []
    for item in items:
        scores = teacher.predict_prominence(torch.from_numpy(item.mel), item.spans)
        labeled.append(
            PreparedUtterance(item.id, item.mel, item.spans, scores.astype(np.float32))
        )
    return labeled


def self_training_study(
    teacher: ProminenceNet,
    unlabeled_items: list[PreparedUtterance],
    eval_items: list[PreparedUtterance],
    model_config: ModelConfig,
    train_config: TrainConfig,
    val_fraction: float = 0.1,
    out_dir: str | Path | None = None,
    stop_fn=None,
) -> dict:
    """Label a corpus with a trained teacher, train a student from scratch on
    the pseudo-labels, and compare both against human annotations."""
    if not unlabeled_items:
        raise StudyError("self-training needs a non-empty unlabeled corpus")
    pseudo = pseudo_label(teacher, unlabeled_items)
    train_items, val_items = _split_train_val(pseudo, val_fraction, train_config.seed)
    student = train(model_config, train_config, train_items, val_items, stop_fn=stop_fn)

    teacher_report = evaluate(teacher, eval_items, dataset_id="teacher")
    student_report = evaluate(student.model, eval_items, dataset_id="student")
    student_predictions = np.concatenate(
        [
            student.model.predict_prominence(torch.from_numpy(i.mel), i.spans)
            for i in unlabeled_items
        ]
    )
    teacher_predictions = np.concatenate([i.target for i in pseudo])
    agreement = pearson(student_predictions, teacher_predictions)
    results = {
        "teacher": teacher_report.to_dict(),
        "student": student_report.to_dict(),
        "student_teacher_pearson": float(agreement),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "self_training.json").write_text(
            json.dumps(results, indent=2), encoding="utf-8"
        )
    return results


def plot_curve(curve: dict[str, float], xlabel: str, ylabel: str, path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = list(curve.keys())
    ys = [curve[x] for x in xs]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
