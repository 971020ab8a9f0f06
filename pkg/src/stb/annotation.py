"""Annotation data model, validation, import/export and feature encoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import AnnotationRejected
from .jsonl import read_jsonl, write_jsonl


class EntityLabel(enum.Enum):
    """Judgment of one entity; ordered human > unsure > bot for the win function."""

    BOT = "bot"
    UNSURE = "unsure"
    HUMAN = "human"

    @property
    def rank(self) -> int:
        return _LABEL_RANK[self]

    def __lt__(self, other: "EntityLabel") -> bool:
        return self.rank < other.rank


_LABEL_RANK = {EntityLabel.BOT: 0, EntityLabel.UNSURE: 1, EntityLabel.HUMAN: 2}


class Feature(enum.Enum):
    FLUENCY = "fluency"
    SPECIFICITY = "specificity"
    SENSIBLENESS = "sensibleness"


FEATURES = (Feature.FLUENCY, Feature.SPECIFICITY, Feature.SENSIBLENESS)


class Choice(enum.Enum):
    """Preference between the two entities of a segment."""

    FIRST = "first"
    TIE = "tie"
    SECOND = "second"


@dataclass(frozen=True)
class FeaturePreference:
    feature: Feature
    choice: Choice


@dataclass(frozen=True)
class AnnotationRecord:
    """One worker's judgment of one segment item."""

    item_id: str
    worker_id: str
    labels: tuple[EntityLabel, EntityLabel]  # slot 0, slot 1
    preferences: Mapping[Feature, Choice]
    duration_seconds: float
    submitted_at: str = ""

    def __post_init__(self):
        if len(self.labels) != 2:
            raise AnnotationRejected("labels must cover both entity slots")
        missing = [f.value for f in FEATURES if f not in self.preferences]
        if missing:
            raise AnnotationRejected(f"missing feature preference(s): {', '.join(missing)}")
        if self.duration_seconds < 0:
            raise AnnotationRejected("duration_seconds must be nonnegative")


def encode_feature(pref: FeaturePreference | Choice, slot: int) -> int:
    """Encode a preference from one slot's perspective: preferred +1, tie 0, other -1."""
    choice = pref.choice if isinstance(pref, FeaturePreference) else pref
    if choice is Choice.TIE:
        return 0
    preferred_slot = 0 if choice is Choice.FIRST else 1
    return 1 if slot == preferred_slot else -1


# -- serialization --


def record_to_dict(rec: AnnotationRecord) -> dict:
    return {
        "item_id": rec.item_id,
        "worker_id": rec.worker_id,
        "labels": [lab.value for lab in rec.labels],
        "preferences": {f.value: rec.preferences[f].value for f in FEATURES},
        "duration_seconds": rec.duration_seconds,
        "submitted_at": rec.submitted_at,
    }


def record_from_dict(obj: dict) -> AnnotationRecord:
    try:
        labels = tuple(EntityLabel(v) for v in obj["labels"])
        prefs = {Feature(k): Choice(v) for k, v in obj["preferences"].items()}
        return AnnotationRecord(
            item_id=str(obj["item_id"]),
            worker_id=str(obj["worker_id"]),
            labels=labels,  # type: ignore[arg-type]
            preferences=prefs,
            duration_seconds=float(obj.get("duration_seconds", 0.0)),
            submitted_at=str(obj.get("submitted_at", "")),
        )
    except AnnotationRejected:
        raise
    except Exception as exc:
        raise AnnotationRejected(f"malformed annotation record: {exc}") from exc


def save_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    write_jsonl(path, (record_to_dict(r) for r in records))


class AnnotationValidator:
    """Validates records against a plan (and, when available, the claim ledger).

    Tracks (item, worker) pairs so duplicate submissions are rejected. Without
    a ledger the worker-assignment check is skipped: offline imports of an
    exported log have already passed it at submission time.
    """

    def __init__(self, plan, ledger=None):
        self.plan = plan
        self.ledger = ledger
        self.seen: set[tuple[str, str]] = set()

    def validate(self, record: AnnotationRecord) -> AnnotationRecord:
        key = (record.item_id, record.worker_id)
        if record.item_id not in self.plan.items_by_id:
            raise AnnotationRejected(f"unknown item {record.item_id!r}", record_key=key)
        if self.ledger is not None and not self.ledger.worker_has_item(record.worker_id, record.item_id):
            raise AnnotationRejected(
                f"worker {record.worker_id!r} is not assigned a batch containing {record.item_id!r}",
                record_key=key,
            )
        if key in self.seen:
            raise AnnotationRejected(f"duplicate submission for {key}", record_key=key)
        self.seen.add(key)
        return record


def validate_annotation(record: AnnotationRecord, plan, ledger=None,
                        seen: set[tuple[str, str]] | None = None) -> AnnotationRecord:
    """One-shot validation of a single record (see AnnotationValidator)."""
    validator = AnnotationValidator(plan, ledger)
    if seen:
        validator.seen = seen
    return validator.validate(record)


def import_annotations(path: str | Path, plan, ledger=None) -> tuple[list[AnnotationRecord], list[str]]:
    """Load records from JSONL, returning (valid records, rejection reasons)."""
    validator = AnnotationValidator(plan, ledger)
    accepted: list[AnnotationRecord] = []
    rejected: list[str] = []
    for lineno, obj in read_jsonl(path):
        try:
            accepted.append(validator.validate(record_from_dict(obj)))
        except AnnotationRejected as exc:
            rejected.append(f"line {lineno}: {exc.reason}")
    return accepted, rejected
