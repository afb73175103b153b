"""Command-line entry point.

Subcommands: prepare, aggregate, train, evaluate, infer, baseline, study,
serve. Configuration is layered (built-in defaults < --config JSON file <
explicit flags) and its hash is stamped into every artifact for provenance.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import annotations as ann
from .audio import load_audio_16k
from .baseline import wavelet_scores
from .corpus import load_corpus, partition_corpus
from .errors import DataError, ProminenceError
from .evaluation import evaluate, render_table, write_report
from .features import DEFAULT_MEL, FeatureCache, MelConfig
from .model import ModelConfig, load_checkpoint
from .prepare import prepare_corpus
from .training import TrainConfig, train
from .utils import config_hash

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; we reserve 2 for data errors
        raise UsageError(message)


def _layered(args: argparse.Namespace, keys: list[str]) -> dict:
    """defaults < config file < explicit flags; None flags do not override."""
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _provenance(merged: dict) -> str:
    # Output destinations are not parameters: identical inputs and seeds must
    # produce identical artifacts wherever they are written.
    return config_hash(
        {k: v for k, v in merged.items() if k not in ("output", "output_dir")}
    )


def _mel_config(merged: dict) -> MelConfig:
    if "mel" in merged:
        return MelConfig(**merged["mel"])
    return DEFAULT_MEL


def _load_targets(path: str) -> dict[str, ann.ProminenceTarget]:
    return {t.utterance_id: t for t in ann.read_targets_csv(path)}


def _write_scores_csv(path, rows, provenance: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={provenance}\n")
        writer = csv.writer(handle)
        writer.writerow(["utterance_id", "word_index", "token", "prominence"])
        writer.writerows(rows)


def cmd_prepare(args) -> int:
    merged = _layered(args, ["manifest", "cache_dir"])
    mel_config = _mel_config(merged)
    utterances = load_corpus(merged["manifest"])
    cache = FeatureCache(merged["cache_dir"], mel_config)
    index = {}
    for utterance in utterances:
        mel = cache.melspectrogram(load_audio_16k(utterance.audio_ref))
        index[utterance.id] = {
            "frames": int(mel.shape[1]),
            "spans": [[s.token, s.start_frame, s.end_frame] for s in utterance.words],
        }
    payload = {
        "config_hash": _provenance({**merged, "mel": mel_config.to_dict()}),
        "feature_config": mel_config.to_dict(),
        "utterances": index,
    }
    out = Path(merged["cache_dir"]) / "prepared.json"
    out.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"prepared {len(index)} utterances -> {out}")
    return EXIT_OK


def _read_manifest_annotations(manifest: str) -> list[ann.AnnotationRecord]:
    root = Path(manifest).parent
    records: list[ann.AnnotationRecord] = []
    for entry in json.loads(Path(manifest).read_text(encoding="utf-8")):
        if "annotations" not in entry:
            continue
        records.extend(ann.read_annotation_file(root / entry["annotations"]))
    if not records:
        raise DataError(f"no annotation files referenced by {manifest}")
    return records


def cmd_aggregate(args) -> int:
    merged = _layered(args, ["manifest", "output", "rasch_seed"])
    utterances = {u.id: u for u in load_corpus(merged["manifest"], validate_audio=False)}
    records = _read_manifest_annotations(merged["manifest"])
    kept, blocked = ann.exclude_filtered_annotators(records)
    by_utterance: dict[str, list[ann.AnnotationRecord]] = {}
    for record in kept:
        by_utterance.setdefault(record.utterance_id, []).append(record)
    targets = [ann.aggregate_prominence(recs) for recs in by_utterance.values()]
    ann.export_targets_csv(merged["output"], targets, utterances)

    report: dict = {
        "config_hash": _provenance(merged),
        "utterances": len(targets),
        "records": len(kept),
        "blocked_annotators": sorted(blocked),
    }
    try:
        report["kappa"] = ann.pairwise_kappa_summary(kept)
    except ProminenceError as exc:
        report["kappa"] = {"error": str(exc)}
    try:
        fit = ann.fit_rasch(kept, seed=int(merged.get("rasch_seed", 0)))
        report["rasch"] = {
            "heldout_accuracy": fit.heldout_accuracy,
            "majority_baseline": fit.heldout_majority_accuracy,
        }
    except ProminenceError as exc:
        report["rasch"] = {"error": str(exc)}
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _prepared_split(merged: dict):
    mel_config = _mel_config(merged)
    utterances = load_corpus(merged["manifest"])
    targets = _load_targets(merged["targets"])
    cache = FeatureCache(merged["cache_dir"], mel_config) if merged.get("cache_dir") else None
    items = prepare_corpus(utterances, targets, mel_config, cache, require_targets=True)
    partition = partition_corpus([i.id for i in items], seed=int(merged.get("seed", 0)))
    by_id = {item.id: item for item in items}
    return (
        [by_id[i] for i in partition.train],
        [by_id[i] for i in partition.valid],
        [by_id[i] for i in partition.test],
        mel_config,
    )


def cmd_train(args) -> int:
    keys = [
        "manifest", "targets", "output_dir", "cache_dir", "location", "method",
        "loss", "learning_rate", "max_steps", "validate_every",
        "max_frames_per_batch", "seed",
    ]
    merged = _layered(args, keys)
    train_items, val_items, _, mel_config = _prepared_split(merged)
    model_config = ModelConfig(
        location=merged.get("location", "intermediate"),
        method=merged.get("method", "sum"),
        loss=merged.get("loss", "bce"),
    )
    train_config = TrainConfig(
        learning_rate=float(merged.get("learning_rate", 1e-3)),
        max_steps=int(merged.get("max_steps", 6000)),
        validate_every=int(merged.get("validate_every", 100)),
        max_frames_per_batch=int(merged.get("max_frames_per_batch", 75000)),
        seed=int(merged.get("seed", 0)),
    )
    out_dir = Path(merged["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    result = train(
        model_config, train_config, train_items, val_items,
        mel_config=mel_config, log_path=out_dir / "train_log.jsonl",
    )
    result.save(
        out_dir / "checkpoint.pt", mel_config,
        extra={"config_hash": _provenance(merged)},
    )
    print(
        f"best step {result.best_step} "
        f"val pearson {result.best_val_pearson if result.best_val_pearson is not None else 'n/a'}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    merged = _layered(args, ["manifest", "targets", "checkpoint", "output", "dataset_id", "cache_dir"])
    mel_config = _mel_config(merged)
    utterances = load_corpus(merged["manifest"])
    targets = _load_targets(merged["targets"])
    cache = FeatureCache(merged["cache_dir"], mel_config) if merged.get("cache_dir") else None
    items = prepare_corpus(utterances, targets, mel_config, cache)
    model, _ = load_checkpoint(merged["checkpoint"])
    report = evaluate(
        model, items,
        dataset_id=merged.get("dataset_id", Path(merged["manifest"]).stem),
        config_hash=_provenance(merged),
    )
    if merged.get("output"):
        write_report(merged["output"], report)
    print(render_table([report]))
    return EXIT_OK


def cmd_infer(args) -> int:
    merged = _layered(args, ["manifest", "checkpoint", "output", "cache_dir"])
    mel_config = _mel_config(merged)
    utterances = load_corpus(merged["manifest"])
    cache = FeatureCache(merged["cache_dir"], mel_config) if merged.get("cache_dir") else None
    items = prepare_corpus(utterances, None, mel_config, cache)
    model, _ = load_checkpoint(merged["checkpoint"])
    import torch

    rows = []
    for item in items:
        scores = model.predict_prominence(torch.from_numpy(item.mel), item.spans)
        rows.extend(
            (item.id, w, span.token, f"{score:.6f}")
            for w, (span, score) in enumerate(zip(item.spans, scores))
        )
    _write_scores_csv(merged["output"], rows, _provenance(merged))
    print(f"wrote {len(rows)} word scores -> {merged['output']}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    merged = _layered(args, ["manifest", "output", "targets"])
    utterances = load_corpus(merged["manifest"])
    targets = _load_targets(merged["targets"]) if merged.get("targets") else {}
    rows, pooled_scores, pooled_targets = [], [], []
    for utterance in utterances:
        audio = load_audio_16k(utterance.audio_ref)
        scores = wavelet_scores(audio, utterance.words)
        rows.extend(
            (utterance.id, w, span.token, f"{score:.6f}")
            for w, (span, score) in enumerate(zip(utterance.words, scores))
        )
        if utterance.id in targets:
            pooled_scores.append(scores)
            pooled_targets.append(targets[utterance.id].prominence)
    _write_scores_csv(merged["output"], rows, _provenance(merged))
    if pooled_scores:
        from .evaluation import pearson

        correlation = pearson(
            np.concatenate(pooled_scores), np.concatenate(pooled_targets)
        )
        print(json.dumps({"pearson": correlation, "words": sum(map(len, pooled_scores))}))
    print(f"wrote {len(rows)} baseline scores -> {merged['output']}")
    return EXIT_OK


def cmd_study(args) -> int:
    from . import experiments

    merged = _layered(args, ["output_dir", "max_workers"])
    study = merged.get("study")
    if study not in {"ablation", "scaling", "redundancy", "self_training"}:
        raise UsageError(f"unknown study {study!r} (set \"study\" in the config file)")
    train_items, val_items, eval_items, _ = _prepared_split(merged)
    out_dir = Path(merged["output_dir"])
    train_config = TrainConfig(
        max_steps=int(merged.get("max_steps", 6000)),
        validate_every=int(merged.get("validate_every", 100)),
        max_frames_per_batch=int(merged.get("max_frames_per_batch", 75000)),
    )
    model_config = ModelConfig(
        location=merged.get("location", "intermediate"),
        method=merged.get("method", "sum"),
        loss=merged.get("loss", "bce"),
    )
    seeds = tuple(merged.get("seeds", [0, 1, 2]))
    if study == "ablation":
        experiments.ablation_grid(
            train_items, val_items, eval_items, train_config, seeds,
            out_dir=out_dir, max_workers=int(merged.get("max_workers", 1)),
        )
    elif study == "scaling":
        experiments.scaling_study(
            train_items + val_items, merged["sizes"], eval_items,
            model_config, train_config, seeds, out_dir=out_dir,
        )
    elif study == "redundancy":
        records = _read_manifest_annotations(merged["manifest"])
        by_utt: dict[str, list] = {}
        for record in records:
            by_utt.setdefault(record.utterance_id, []).append(record)
        items_by_id = {i.id: i for i in train_items + val_items + eval_items}
        experiments.redundancy_study(
            items_by_id, by_utt,
            [tuple(config) for config in merged["budget_configs"]],
            eval_items, model_config, train_config, seeds, out_dir=out_dir,
        )
    else:
        teacher, _ = load_checkpoint(merged["checkpoint"])
        experiments.self_training_study(
            teacher, train_items, eval_items, model_config, train_config,
            out_dir=out_dir,
        )
    print(f"study {study} complete -> {out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import PrescreenItem, ServiceConfig, build_app

    merged = _layered(args, ["manifest", "db", "host", "port", "admin_token"])
    prescreen = [
        PrescreenItem(**item) for item in merged.get("prescreen_items", [])
    ]
    config = ServiceConfig(
        db_path=Path(merged.get("db", "annotations.sqlite")),
        manifest=Path(merged["manifest"]),
        strata=[tuple(s) for s in merged.get("strata", [[0, 1]])],
        prescreen_items=prescreen,
        admin_token=merged.get("admin_token", "admin"),
        enforce_session_duration=bool(merged.get("enforce_session_duration", True)),
    )
    app = build_app(config)
    uvicorn.run(app, host=merged.get("host", "127.0.0.1"), port=int(merged.get("port", 8000)))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="prominence", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, flags):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (layered under flags)")
        for flag, kwargs in flags:
            p.add_argument(flag, **kwargs)
        p.set_defaults(fn=fn)
        return p

    add("prepare", cmd_prepare, [
        ("--manifest", {}), ("--cache-dir", {"dest": "cache_dir"}),
    ])
    add("aggregate", cmd_aggregate, [
        ("--manifest", {}), ("--output", {}), ("--rasch-seed", {"dest": "rasch_seed", "type": int}),
    ])
    add("train", cmd_train, [
        ("--manifest", {}), ("--targets", {}), ("--output-dir", {"dest": "output_dir"}),
        ("--cache-dir", {"dest": "cache_dir"}),
        ("--location", {"choices": ["framewise", "posthoc", "intermediate", "prehoc"]}),
        ("--method", {"choices": ["average", "max", "sum", "center"]}),
        ("--loss", {"choices": ["bce", "mse"]}),
        ("--learning-rate", {"dest": "learning_rate", "type": float}),
        ("--max-steps", {"dest": "max_steps", "type": int}),
        ("--validate-every", {"dest": "validate_every", "type": int}),
        ("--max-frames-per-batch", {"dest": "max_frames_per_batch", "type": int}),
        ("--seed", {"type": int}),
    ])
    add("evaluate", cmd_evaluate, [
        ("--manifest", {}), ("--targets", {}), ("--checkpoint", {}),
        ("--output", {}), ("--dataset-id", {"dest": "dataset_id"}),
        ("--cache-dir", {"dest": "cache_dir"}),
    ])
    add("infer", cmd_infer, [
        ("--manifest", {}), ("--checkpoint", {}), ("--output", {}),
        ("--cache-dir", {"dest": "cache_dir"}),
    ])
    add("baseline", cmd_baseline, [
        ("--manifest", {}), ("--output", {}), ("--targets", {}),
    ])
    add("study", cmd_study, [
        ("--output-dir", {"dest": "output_dir"}),
        ("--max-workers", {"dest": "max_workers", "type": int}),
    ])
    add("serve", cmd_serve, [
        ("--manifest", {}), ("--db", {}), ("--host", {}),
        ("--port", {"type": int}), ("--admin-token", {"dest": "admin_token"}),
    ])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return EXIT_DATA
    except (ProminenceError, FileNotFoundError, KeyError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
