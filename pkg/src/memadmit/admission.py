"""Threshold gate, conflict detection and merge over an immutable memory store.

Per candidate: score the five signals against a snapshot of the store, reject
below threshold, otherwise either merge into a conflicting entry that it beats
or append a new entry. A conflict is an entry with cosine similarity above
``conflict_similarity`` whose normalized token sequence differs from the
candidate's. When the candidate does not beat the conflict it is still
appended as a new entry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from memadmit.core import (
    AdmissionDecision,
    AdmissionPolicy,
    CandidateMemory,
    Conversation,
    InputError,
    Outcome,
    aggregate_score,
)
from memadmit.ingest import extract_candidates
from memadmit.scorers.features import FeatureExtractor
from memadmit.scorers.text import tokenize
from memadmit.scorers.utility import ScoringError

logger = logging.getLogger(__name__)

DEFAULT_CONFLICT_SIMILARITY = 0.85


@dataclass(frozen=True)
class MemoryEntry:
    entry_id: str
    text: str
    embedding: tuple[float, ...]
    score: float
    admitted_at: int
    updated_at: int
    provenance: tuple[str, ...]
    merge_count: int = 0

    def __post_init__(self) -> None:
        if not self.provenance:
            raise InputError(f"entry {self.entry_id} has empty provenance")
        if self.updated_at < self.admitted_at:
            raise InputError(f"entry {self.entry_id} updated before it was admitted")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > 1e-6:
            raise InputError(f"entry {self.entry_id} embedding norm {norm} is not 1")

    @classmethod
    def from_candidate(cls, candidate: CandidateMemory, embedding: np.ndarray, score: float, now: int) -> "MemoryEntry":
        return cls(
            entry_id=f"m-{candidate.candidate_id}",
            text=candidate.text,
            embedding=tuple(float(x) for x in embedding),
            score=score,
            admitted_at=now,
            updated_at=now,
            provenance=(candidate.candidate_id,),
        )

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "text": self.text,
            "embedding": list(self.embedding),
            "score": self.score,
            "admitted_at": self.admitted_at,
            "updated_at": self.updated_at,
            "provenance": list(self.provenance),
            "merge_count": self.merge_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MemoryEntry":
        return cls(
            entry_id=d["entry_id"],
            text=d["text"],
            embedding=tuple(float(x) for x in d["embedding"]),
            score=float(d["score"]),
            admitted_at=int(d["admitted_at"]),
            updated_at=int(d["updated_at"]),
            provenance=tuple(d["provenance"]),
            merge_count=int(d["merge_count"]),
        )


@dataclass(frozen=True)
class MemoryStore:
    entries: tuple[MemoryEntry, ...] = ()
    conflict_similarity: float = DEFAULT_CONFLICT_SIMILARITY

    def __post_init__(self) -> None:
        ids = [e.entry_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InputError("memory store entry ids must be unique")
        if len({len(e.embedding) for e in self.entries}) > 1:
            raise InputError("memory store embeddings must share one dimension")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @cached_property
    def _matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.asarray([e.embedding for e in self.entries], dtype=np.float64)

    def embedding_matrix(self) -> np.ndarray:
        return self._matrix

    def get(self, entry_id: str) -> MemoryEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise KeyError(entry_id)

    def with_entry(self, entry: MemoryEntry) -> "MemoryStore":
        return replace(self, entries=self.entries + (entry,))

    def with_replacement(self, entry: MemoryEntry) -> "MemoryStore":
        if not any(e.entry_id == entry.entry_id for e in self.entries):
            raise KeyError(entry.entry_id)
        return replace(self, entries=tuple(entry if e.entry_id == entry.entry_id else e for e in self.entries))


def find_conflict(
    candidate: CandidateMemory, candidate_embedding: np.ndarray, store: MemoryStore
) -> Optional[MemoryEntry]:
    """Most similar entry above the conflict threshold with differing content, if any."""
    if not len(store):
        return None
    sims = store.embedding_matrix() @ np.asarray(candidate_embedding, dtype=np.float64)
    own = tokenize(candidate.text)
    best: Optional[MemoryEntry] = None
    best_sim = -np.inf
    for entry, sim in zip(store.entries, sims):
        if sim > store.conflict_similarity and sim > best_sim and tokenize(entry.text) != own:
            best, best_sim = entry, sim
    return best


def merge(
    candidate: CandidateMemory,
    embedding: np.ndarray,
    score: float,
    conflict: MemoryEntry,
    now: int,
) -> MemoryEntry:
    """Replace the conflicting entry's content with the candidate's, keeping its identity."""
    provenance = conflict.provenance + tuple(p for p in (candidate.candidate_id,) if p not in conflict.provenance)
    return replace(
        conflict,
        text=candidate.text,
        embedding=tuple(float(x) for x in embedding),
        score=score,
        updated_at=max(now, conflict.admitted_at),
        provenance=provenance,
        merge_count=conflict.merge_count + 1,
    )


def admit(
    candidate: CandidateMemory,
    history: Sequence,
    store: MemoryStore,
    policy: AdmissionPolicy,
    extractor: FeatureExtractor,
    now: int,
) -> tuple[AdmissionDecision, MemoryStore]:
    """Decide one candidate. Scorer errors propagate and leave the store untouched."""
    result = extractor.compute(candidate, history, store, now)
    score = aggregate_score(result.features, policy)
    if not policy.admits(score):
        return AdmissionDecision(candidate.candidate_id, Outcome.REJECTED, score, result.features), store

    conflict = find_conflict(candidate, result.embedding, store)
    if conflict is not None and score > conflict.score:
        merged = merge(candidate, result.embedding, score, conflict, now)
        decision = AdmissionDecision(candidate.candidate_id, Outcome.UPDATED, score, result.features, conflict.entry_id)
        return decision, store.with_replacement(merged)

    entry = MemoryEntry.from_candidate(candidate, result.embedding, score, now)
    decision = AdmissionDecision(
        candidate.candidate_id,
        Outcome.ADMITTED,
        score,
        result.features,
        conflict.entry_id if conflict is not None else None,
    )
    return decision, store.with_entry(entry)


def process_conversation(
    conversation: Conversation,
    policy: AdmissionPolicy,
    initial_store: MemoryStore,
    extractor: FeatureExtractor,
    *,
    candidates: Optional[Sequence[CandidateMemory]] = None,
    now: Optional[int] = None,
) -> tuple[MemoryStore, list[AdmissionDecision]]:
    """Run every candidate through ``admit`` in conversation order.

    ``now`` defaults to the conversation's final turn timestamp. A candidate
    whose scoring fails is logged as a Rejected decision carrying the error.
    """
    if candidates is None:
        candidates = extract_candidates(conversation)
    ordered = sorted(candidates, key=lambda c: c.last_source_turn)
    ref_time = conversation.final_timestamp if now is None else now
    store = initial_store
    decisions: list[AdmissionDecision] = []
    for cand in ordered:
        history = conversation.history_through(cand.last_source_turn)
        try:
            decision, store = admit(cand, history, store, policy, extractor, ref_time)
        except ScoringError as exc:
            logger.warning("%s", exc)
            decision = AdmissionDecision(cand.candidate_id, Outcome.REJECTED, 0.0, None, error=f"{exc.feature}: {exc}")
        decisions.append(decision)
    return store, decisions


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_store(store: MemoryStore, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in store.entries:
            fh.write(_dumps(entry.to_dict()) + "\n")


def read_store(path: str | Path, conflict_similarity: float = DEFAULT_CONFLICT_SIMILARITY) -> MemoryStore:
    path = Path(path)
    entries = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(MemoryEntry.from_dict(json.loads(line)))
    return MemoryStore(tuple(entries), conflict_similarity)


def format_decision(decision: AdmissionDecision) -> str:
    return _dumps(decision.to_dict())


def write_decisions(decisions: Iterable[AdmissionDecision], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(format_decision(d) + "\n")


def read_decisions(path: str | Path) -> list[AdmissionDecision]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [AdmissionDecision.from_dict(json.loads(line)) for line in fh if line.strip()]
