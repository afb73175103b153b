"""Annotation-collection service.

Serves utterance batches and audio over HTTP+JSON, enforces the listening
prescreen and the two-complete-plays rule server-side, persists submissions
in an append-only sqlite log, blocks annotators that fail the bot filter,
and exports the accepted annotations plus the aggregate prominence CSV.

Endpoints: GET/POST /prescreen, GET /batch, GET /audio/{utterance_id},
POST /submit, GET /export (admin), GET /state.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
import sqlite3
import threading
from contextlib import closing
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .annotations import (
    AnnotationRecord,
    aggregate_prominence,
    passes_bot_filter,
)
from .audio import wav_duration_seconds
from .corpus import Utterance, load_corpus

BATCH_SIZE = 20
MAX_BATCHES_PER_ANNOTATOR = 6
PRESCREEN_MAX_ATTEMPTS = 3
MIN_PLAYS = 2


@dataclass
class PrescreenItem:
    id: str
    prompt: str
    answer: str


@dataclass
class ServiceConfig:
    db_path: Path
    manifest: Path
    # Redundancy strata: the first `count` utterances (in seeded order) are
    # annotated by at least `annotators` people; later strata nest inside
    # earlier counts. Everything else targets one annotation.
    strata: list[tuple[int, int]] = field(default_factory=lambda: [(0, 1)])
    stratum_seed: int = 0
    prescreen_items: list[PrescreenItem] = field(default_factory=list)
    batch_size: int = BATCH_SIZE
    max_batches_per_annotator: int = MAX_BATCHES_PER_ANNOTATOR
    prescreen_max_attempts: int = PRESCREEN_MAX_ATTEMPTS
    min_plays: int = MIN_PLAYS
    enforce_session_duration: bool = True
    admin_token: str = "admin"
    completion_secret: str = "prominence"


_SCHEMA = """
CREATE TABLE IF NOT EXISTS annotators (
    annotator_id TEXT PRIMARY KEY,
    prescreen_passed INTEGER NOT NULL DEFAULT 0,
    prescreen_attempts INTEGER NOT NULL DEFAULT 0,
    batches_completed INTEGER NOT NULL DEFAULT 0,
    blocked INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS batches (
    batch_id TEXT PRIMARY KEY,
    annotator_id TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'assigned',
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS batch_utterances (
    batch_id TEXT NOT NULL,
    utterance_id TEXT NOT NULL,
    position INTEGER NOT NULL,
    PRIMARY KEY (batch_id, position)
);
CREATE TABLE IF NOT EXISTS annotation_log (
    entry_id INTEGER PRIMARY KEY AUTOINCREMENT,
    batch_id TEXT NOT NULL,
    annotator_id TEXT NOT NULL,
    utterance_id TEXT NOT NULL,
    labels TEXT NOT NULL,
    play_count INTEGER NOT NULL,
    accepted INTEGER NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS submissions (
    request_token TEXT PRIMARY KEY,
    batch_id TEXT NOT NULL,
    response TEXT NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class AnnotationStore:
    """Transactional persistence; the annotation log is the source of truth."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.utterances: dict[str, Utterance] = {
            utt.id: utt for utt in load_corpus(config.manifest)
        }
        self.durations = {
            utt_id: wav_duration_seconds(utt.audio_ref)
            for utt_id, utt in self.utterances.items()
        }
        self.targets = self._annotation_targets()
        self._write_lock = threading.Lock()
        with closing(self._connect()) as conn:
            conn.executescript(_SCHEMA)
            conn.commit()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.config.db_path, timeout=30.0)
        conn.row_factory = sqlite3.Row
        return conn

    def _annotation_targets(self) -> dict[str, int]:
        """Per-utterance target annotator counts from the configured strata."""
        ids = sorted(self.utterances)
        random.Random(self.config.stratum_seed).shuffle(ids)
        targets = {utt_id: 1 for utt_id in ids}
        for count, annotators in sorted(self.config.strata, key=lambda s: s[0]):
            for utt_id in ids[:count]:
                targets[utt_id] = max(targets[utt_id], annotators)
        return targets

    # -- annotator state ----------------------------------------------------

    def annotator(self, annotator_id: str, conn=None) -> sqlite3.Row:
        own = conn is None
        conn = conn or self._connect()
        try:
            conn.execute(
                "INSERT OR IGNORE INTO annotators (annotator_id) VALUES (?)",
                (annotator_id,),
            )
            if own:
                conn.commit()
            return conn.execute(
                "SELECT * FROM annotators WHERE annotator_id = ?", (annotator_id,)
            ).fetchone()
        finally:
            if own:
                conn.close()

    def prescreen(self, annotator_id: str, answers: list[str]) -> dict:
        key = [item.answer for item in self.config.prescreen_items]
        passed = len(answers) == len(key) and all(
            str(a).strip() == str(b) for a, b in zip(answers, key)
        )
        with self._write_lock, closing(self._connect()) as conn:
            state = self.annotator(annotator_id, conn)
            if state["blocked"]:
                return {"passed": False, "blocked": True}
            attempts = state["prescreen_attempts"] + 1
            blocked = (not passed) and attempts >= self.config.prescreen_max_attempts
            conn.execute(
                "UPDATE annotators SET prescreen_passed = ?, prescreen_attempts = ?, "
                "blocked = ? WHERE annotator_id = ?",
                (int(passed), attempts, int(blocked), annotator_id),
            )
            conn.commit()
        return {"passed": passed, "blocked": blocked}

    # -- batch assignment ---------------------------------------------------

    def assign_batch(self, annotator_id: str) -> dict:
        with self._write_lock, closing(self._connect()) as conn:
            conn.execute("BEGIN IMMEDIATE")
            state = self.annotator(annotator_id, conn)
            if state["blocked"]:
                raise HTTPException(403, "annotator is blocked")
            if not state["prescreen_passed"]:
                raise HTTPException(403, "listening prescreen not passed")
            if state["batches_completed"] >= self.config.max_batches_per_annotator:
                raise HTTPException(
                    403,
                    f"annotator already completed "
                    f"{self.config.max_batches_per_annotator} batches",
                )
            seen = {
                row["utterance_id"]
                for row in conn.execute(
                    "SELECT bu.utterance_id FROM batch_utterances bu "
                    "JOIN batches b ON b.batch_id = bu.batch_id "
                    "WHERE b.annotator_id = ? AND b.status != 'rejected'",
                    (annotator_id,),
                )
            }
            # Current slots per utterance: accepted annotations plus pending
            # assignments, so concurrent assignments never double-fill a slot.
            slots: dict[str, int] = {utt_id: 0 for utt_id in self.utterances}
            for row in conn.execute(
                "SELECT bu.utterance_id, COUNT(*) AS n FROM batch_utterances bu "
                "JOIN batches b ON b.batch_id = bu.batch_id "
                "WHERE b.status != 'rejected' GROUP BY bu.utterance_id"
            ):
                slots[row["utterance_id"]] = row["n"]
            candidates = [u for u in self.utterances if u not in seen]
            if len(candidates) < self.config.batch_size:
                raise HTTPException(409, "utterance pool exhausted for this annotator")
            # Highest remaining redundancy need first; ties go to the higher
            # target so multi-annotator strata fill before single-annotation
            # coverage.
            candidates.sort(
                key=lambda u: (-(self.targets[u] - slots[u]), -self.targets[u], u)
            )
            chosen = candidates[: self.config.batch_size]
            batch_id = hashlib.sha256(
                f"{annotator_id}:{_now()}:{random.random()}".encode()
            ).hexdigest()[:16]
            conn.execute(
                "INSERT INTO batches (batch_id, annotator_id, status, created_at) "
                "VALUES (?, ?, 'assigned', ?)",
                (batch_id, annotator_id, _now()),
            )
            conn.executemany(
                "INSERT INTO batch_utterances (batch_id, utterance_id, position) "
                "VALUES (?, ?, ?)",
                [(batch_id, utt_id, i) for i, utt_id in enumerate(chosen)],
            )
            conn.commit()
        return {
            "batch_id": batch_id,
            "annotator_id": annotator_id,
            "utterances": [
                {
                    "utterance_id": utt_id,
                    "tokens": self.utterances[utt_id].tokens,
                    "audio_url": f"/audio/{utt_id}",
                    "duration_seconds": self.durations[utt_id],
                }
                for utt_id in chosen
            ],
        }

    # -- submission ---------------------------------------------------------

    def submit(self, payload: "SubmitRequest") -> dict:
        with self._write_lock, closing(self._connect()) as conn:
            conn.execute("BEGIN IMMEDIATE")
            if payload.request_token:
                replay = conn.execute(
                    "SELECT response FROM submissions WHERE request_token = ?",
                    (payload.request_token,),
                ).fetchone()
                if replay:
                    conn.commit()
                    return json.loads(replay["response"])
            batch = conn.execute(
                "SELECT * FROM batches WHERE batch_id = ?", (payload.batch_id,)
            ).fetchone()
            if batch is None:
                raise HTTPException(404, f"unknown batch {payload.batch_id!r}")
            if batch["annotator_id"] != payload.annotator_id:
                raise HTTPException(403, "batch belongs to another annotator")
            if batch["status"] != "assigned":
                raise HTTPException(409, f"batch already {batch['status']}")
            assigned = [
                row["utterance_id"]
                for row in conn.execute(
                    "SELECT utterance_id FROM batch_utterances WHERE batch_id = ? "
                    "ORDER BY position",
                    (payload.batch_id,),
                )
            ]
            submitted = {item.utterance_id: item for item in payload.utterances}
            if sorted(submitted) != sorted(assigned):
                raise HTTPException(422, "submitted utterances do not match the batch")
            records = []
            for utt_id in assigned:
                item = submitted[utt_id]
                expected = self.utterances[utt_id].n_words
                if len(item.labels) != expected:
                    raise HTTPException(
                        422,
                        f"utterance {utt_id!r}: {len(item.labels)} labels "
                        f"for {expected} words",
                    )
                if item.play_count < self.config.min_plays:
                    raise HTTPException(
                        422,
                        f"utterance {utt_id!r}: played {item.play_count} times, "
                        f"minimum is {self.config.min_plays}",
                    )
                records.append(
                    AnnotationRecord(
                        payload.annotator_id, utt_id, tuple(int(v) for v in item.labels)
                    )
                )
            if self.config.enforce_session_duration:
                required = self.config.min_plays * sum(
                    self.durations[utt_id] for utt_id in assigned
                )
                if payload.session_seconds is None or payload.session_seconds < required:
                    raise HTTPException(
                        422,
                        f"session duration {payload.session_seconds} below the "
                        f"{required:.1f}s needed for {self.config.min_plays} full plays",
                    )

            accepted = passes_bot_filter(records) if len(records) == 20 else True
            status = "completed" if accepted else "rejected"
            conn.execute(
                "UPDATE batches SET status = ? WHERE batch_id = ?",
                (status, payload.batch_id),
            )
            now = _now()
            conn.executemany(
                "INSERT INTO annotation_log (batch_id, annotator_id, utterance_id, "
                "labels, play_count, accepted, created_at) VALUES (?, ?, ?, ?, ?, ?, ?)",
                [
                    (
                        payload.batch_id,
                        payload.annotator_id,
                        record.utterance_id,
                        json.dumps(list(record.labels)),
                        submitted[record.utterance_id].play_count,
                        int(accepted),
                        now,
                    )
                    for record in records
                ],
            )
            if accepted:
                conn.execute(
                    "UPDATE annotators SET batches_completed = batches_completed + 1 "
                    "WHERE annotator_id = ?",
                    (payload.annotator_id,),
                )
                code = hashlib.sha256(
                    f"{self.config.completion_secret}:{payload.batch_id}".encode()
                ).hexdigest()[:12]
                response = {"status": "accepted", "completion_code": code}
            else:
                conn.execute(
                    "UPDATE annotators SET blocked = 1 WHERE annotator_id = ?",
                    (payload.annotator_id,),
                )
                response = {"status": "rejected", "reason": "bot filter failed"}
            if payload.request_token:
                conn.execute(
                    "INSERT INTO submissions (request_token, batch_id, response) "
                    "VALUES (?, ?, ?)",
                    (payload.request_token, payload.batch_id, json.dumps(response)),
                )
            conn.commit()
        return response

    # -- export -------------------------------------------------------------

    def accepted_records(self) -> list[AnnotationRecord]:
        with closing(self._connect()) as conn:
            rows = conn.execute(
                "SELECT l.annotator_id, l.utterance_id, l.labels FROM annotation_log l "
                "JOIN annotators a ON a.annotator_id = l.annotator_id "
                "WHERE l.accepted = 1 AND a.blocked = 0 ORDER BY l.entry_id"
            ).fetchall()
        return [
            AnnotationRecord(
                row["annotator_id"],
                row["utterance_id"],
                tuple(json.loads(row["labels"])),
            )
            for row in rows
        ]

    def export(self) -> dict:
        records = self.accepted_records()
        by_utterance: dict[str, list[AnnotationRecord]] = {}
        for record in records:
            by_utterance.setdefault(record.utterance_id, []).append(record)
        files = [
            {
                "utterance_id": utt_id,
                "annotations": [
                    {"annotator": r.annotator_id, "labels": list(r.labels)}
                    for r in recs
                ],
            }
            for utt_id, recs in sorted(by_utterance.items())
        ]
        csv_buffer = io.StringIO()
        csv_buffer.write("utterance_id,word_index,token,prominence,annotator_count\n")
        for utt_id, recs in sorted(by_utterance.items()):
            target = aggregate_prominence(recs)
            tokens = self.utterances[utt_id].tokens
            for index, value in enumerate(target.prominence):
                csv_buffer.write(
                    f"{utt_id},{index},{tokens[index]},{value:.6f},"
                    f"{target.annotator_count}\n"
                )
        return {"utterances": files, "aggregate_csv": csv_buffer.getvalue()}


class PrescreenRequest(BaseModel):
    annotator_id: str
    answers: list[str]


class SubmittedUtterance(BaseModel):
    utterance_id: str
    labels: list[int]
    play_count: int


class SubmitRequest(BaseModel):
    batch_id: str
    annotator_id: str
    utterances: list[SubmittedUtterance]
    session_seconds: float | None = None
    request_token: str | None = None


def build_app(config: ServiceConfig) -> FastAPI:
    store = AnnotationStore(config)
    app = FastAPI(title="prominence annotation service")
    app.state.store = store

    @app.get("/prescreen")
    def prescreen_items():
        return {
            "items": [
                {"id": item.id, "prompt": item.prompt}
                for item in config.prescreen_items
            ]
        }

    @app.post("/prescreen")
    def prescreen(request: PrescreenRequest):
        return store.prescreen(request.annotator_id, request.answers)

    @app.get("/batch")
    def batch(annotator_id: str = Query(...)):
        return store.assign_batch(annotator_id)

    @app.get("/audio/{utterance_id}")
    def audio(utterance_id: str):
        utterance = store.utterances.get(utterance_id)
        if utterance is None:
            raise HTTPException(404, f"unknown utterance {utterance_id!r}")
        return FileResponse(utterance.audio_ref, media_type="audio/wav")

    @app.post("/submit")
    def submit(request: SubmitRequest):
        return store.submit(request)

    @app.get("/state")
    def state(annotator_id: str = Query(...)):
        row = store.annotator(annotator_id)
        return {
            "annotator_id": row["annotator_id"],
            "prescreen_passed": bool(row["prescreen_passed"]),
            "batches_completed": row["batches_completed"],
            "blocked": bool(row["blocked"]),
        }

    @app.get("/export")
    def export(admin_token: str = Query(...)):
        if admin_token != config.admin_token:
            raise HTTPException(403, "bad admin token")
        return JSONResponse(store.export())

    return app
