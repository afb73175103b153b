"""Small shared helpers: provenance hashing and JSON-lines IO."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable


def config_hash(config: dict[str, Any]) -> str:
    """Stable short hash of a configuration mapping, for artifact provenance."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
