"""Line-delimited JSON helpers used by every file format in the package."""

import json
import os
from pathlib import Path
from typing import Any, Iterator


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed object) for every non-blank line."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            yield lineno, json.loads(stripped)


def write_jsonl(path: str | Path, records: Iterator[dict] | list[dict]) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


class AppendLog:
    """Append-only JSONL log with fsync-before-return durability."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._size = 0
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                self._size = sum(1 for line in f if line.strip())
        self._f = open(self.path, "a", encoding="utf-8")

    def append(self, record: dict[str, Any]) -> int:
        """Write one record durably; returns the 0-based record offset."""
        self._f.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._f.flush()
        os.fsync(self._f.fileno())
        offset = self._size
        self._size += 1
        return offset

    def close(self) -> None:
        self._f.close()

    def replay(self) -> Iterator[dict]:
        for _, rec in read_jsonl(self.path):
            yield rec
