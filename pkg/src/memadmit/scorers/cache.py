"""Persistent score cache keyed by (feature, content hash, version)."""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class ScoreCache:
    """Thread-safe score map, optionally backed by a line-delimited file.

    Each ``put`` appends one record ``{feature, content_hash, version, score}``
    to the file; on open the file is replayed, later records winning.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else None
        self._scores: dict[tuple[str, str, str], float] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[tuple[str, str, str], threading.Lock] = {}
        self.hits = 0
        self.misses = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                self._scores[(rec["feature"], rec["content_hash"], rec["version"])] = float(rec["score"])

    def __len__(self) -> int:
        return len(self._scores)

    def key_lock(self, feature: str, text: str, version: str) -> threading.Lock:
        """Per-key lock so concurrent misses on one key produce a single provider call."""
        key = (feature, content_hash(text), version)
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def get(self, feature: str, text: str, version: str) -> Optional[float]:
        key = (feature, content_hash(text), version)
        with self._lock:
            value = self._scores.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def put(self, feature: str, text: str, version: str, score: float) -> None:
        key = (feature, content_hash(text), version)
        with self._lock:
            self._scores[key] = score
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                rec = {"feature": feature, "content_hash": key[1], "version": version, "score": score}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
