"""HTTP annotation service: batch claims, submissions, progress, export.

State is an append-only event log (claims + annotations) plus an in-memory
ledger rebuilt by replay on startup. Claims and submissions are serialized
through one lock and fsynced before acknowledgment, so an acknowledged record
survives a crash and ledger invariants hold under concurrent workers.
"""

from __future__ import annotations

import secrets
import threading
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.responses import PlainTextResponse

from .annotation import (AnnotationRecord, AnnotationRejected, AnnotationValidator,
                         record_from_dict, record_to_dict)
from .batching import AssignmentLedger, Plan
from .jsonl import AppendLog


class SessionState:
    def __init__(self, plan: Plan, store_dir: str | Path, admin_token: str | None = None):
        self.plan = plan
        self.ledger = AssignmentLedger(
            list(plan.batches),
            annotators_per_item=plan.config.annotators_per_item,
            max_batches_per_worker=plan.config.max_batches_per_worker,
        )
        self.validator = AnnotationValidator(plan, self.ledger)
        store = Path(store_dir)
        store.mkdir(parents=True, exist_ok=True)
        self.log = AppendLog(store / "events.jsonl")
        self.admin_token = admin_token or secrets.token_hex(16)
        token_path = store / "admin_token.txt"
        if not token_path.exists():
            token_path.write_text(self.admin_token + "\n", encoding="utf-8")
        self.annotation_count: Counter = Counter()  # item -> submissions
        self.lock = threading.Lock()
        self._replay()

    def _replay(self) -> None:
        for event in self.log.replay():
            if event.get("type") == "claim":
                self.ledger.restore_claim(event["worker_id"], event["batch_id"])
            elif event.get("type") == "annotation":
                rec = record_from_dict(event)
                self.validator.seen.add((rec.item_id, rec.worker_id))
                self.annotation_count[rec.item_id] += 1

    def claim(self, worker_id: str):
        with self.lock:
            batch = self.ledger.claim_next_batch(worker_id)
            if batch is not None:
                self.log.append({
                    "type": "claim",
                    "worker_id": worker_id,
                    "batch_id": batch.batch_id,
                    "ts": _now(),
                })
            return batch

    def submit(self, record: AnnotationRecord) -> int:
        with self.lock:
            self.validator.validate(record)
            offset = self.log.append({"type": "annotation", **record_to_dict(record)})
            self.annotation_count[record.item_id] += 1
            return offset

    def progress(self) -> dict:
        with self.lock:
            quota = self.plan.config.annotators_per_item
            overall = Counter()
            per_pair: dict[str, Counter] = {}
            per_k: dict[int, Counter] = {}
            for item in self.plan.items_by_id.values():
                n = self.annotation_count[item.item_id]
                state = "pending" if n == 0 else ("fully" if n >= quota else "partially")
                overall[state] += 1
                pair = " vs ".join(sorted(item.systems)) if item.kind == "bot_bot" else "human"
                per_pair.setdefault(pair, Counter())[state] += 1
                per_k.setdefault(item.k, Counter())[state] += 1
            return {
                "items": _counts(overall),
                "per_pair": {p: _counts(c) for p, c in sorted(per_pair.items())},
                "per_segment_length": {k: _counts(c) for k, c in sorted(per_k.items())},
            }

    def export_lines(self) -> str:
        import json

        with self.lock:
            lines = [
                json.dumps({k: v for k, v in event.items() if k != "type"}, ensure_ascii=False)
                for event in self.log.replay()
                if event.get("type") == "annotation"
            ]
        return "\n".join(lines) + ("\n" if lines else "")


def _counts(counter: Counter) -> dict:
    return {"fully": counter["fully"], "partially": counter["partially"], "pending": counter["pending"]}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_app(plan: Plan, store_dir: str | Path, admin_token: str | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="annotation service")
    state = SessionState(plan, store_dir, admin_token)
    app.state.session = state

    @app.post("/api/register")
    def register() -> dict:
        return {"worker_token": secrets.token_hex(12)}

    @app.get("/api/batch/next")
    def next_batch(x_worker_token: str | None = Header(default=None)) -> dict:
        if not x_worker_token:
            raise HTTPException(status_code=401, detail="missing worker token")
        batch = state.claim(x_worker_token)
        if batch is None:
            return {"batch": None}
        # entity identities withheld: items carry only texts, rendered as Speaker A/B
        return {
            "batch": {
                "batch_id": batch.batch_id,
                "items": [
                    {"item_id": i.item_id, "k": i.k, "exchanges": [list(e) for e in i.exchanges]}
                    for i in batch.items
                ],
            }
        }

    @app.post("/api/annotation")
    def submit(body: dict, x_worker_token: str | None = Header(default=None)) -> dict:
        if not x_worker_token:
            raise HTTPException(status_code=401, detail="missing worker token")
        try:
            record = record_from_dict({**body, "worker_id": x_worker_token,
                                       "submitted_at": _now()})
            offset = state.submit(record)
        except AnnotationRejected as exc:
            status = 409 if "duplicate" in exc.reason else 400
            raise HTTPException(status_code=status, detail=exc.reason) from exc
        return {"ok": True, "offset": offset}

    @app.get("/api/progress")
    def progress() -> dict:
        return state.progress()

    @app.get("/api/export")
    def export(x_admin_token: str | None = Header(default=None)) -> PlainTextResponse:
        if x_admin_token != state.admin_token:
            raise HTTPException(status_code=403, detail="admin token required")
        return PlainTextResponse(state.export_lines(), media_type="application/x-ndjson")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
