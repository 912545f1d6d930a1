"""Domain types shared across the engine, plus score aggregation and metrics.

Nothing in here performs I/O. All types are frozen dataclasses so they can be
handed to worker threads without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

FEATURE_NAMES: tuple[str, ...] = ("utility", "confidence", "novelty", "recency", "type_prior")

# Scores are rounded to this many decimals so that values which are equal in
# exact arithmetic (0.45 + 0.1 vs 0.55) compare equal against a threshold.
SCORE_DECIMALS = 12
# Features carry 10 decimals; grid weights carry at most 2, so an exact
# weighted sum fits in SCORE_DECIMALS and every summation order rounds alike.
FEATURE_DECIMALS = 10
SIMPLEX_TOL = 1e-9


class InputError(ValueError):
    """Caller supplied data that violates an operation's precondition."""


class InvariantViolation(RuntimeError):
    """A checked invariant failed while running an experiment."""


class Domain(str, Enum):
    PERSONAL = "personal"
    PROFESSIONAL = "professional"
    OTHER = "other"

    @classmethod
    def parse(cls, value: Optional[str]) -> "Domain":
        if value is None or value == "":
            return cls.OTHER
        try:
            return cls(value.lower())
        except ValueError as exc:
            raise InputError(f"unknown domain {value!r}") from exc


class ContentType(str, Enum):
    PREFERENCE_OR_IDENTITY = "PreferenceOrIdentity"
    FACT = "Fact"
    PLAN_OR_GOAL = "PlanOrGoal"
    TRANSIENT_STATE = "TransientState"


class Outcome(str, Enum):
    ADMITTED = "Admitted"
    UPDATED = "Updated"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class Turn:
    turn_id: int
    session_id: str
    speaker: str
    text: str
    timestamp: int


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    turns: tuple[Turn, ...]
    domain: Domain = Domain.OTHER

    def __post_init__(self) -> None:
        if not self.turns:
            raise InputError(f"conversation {self.conversation_id!r} has no turns")
        ids = [t.turn_id for t in self.turns]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise InputError(f"conversation {self.conversation_id!r}: turn ids not strictly increasing")
        last_ts: dict[str, int] = {}
        for t in self.turns:
            prev = last_ts.get(t.session_id)
            if prev is not None and t.timestamp < prev:
                raise InputError(
                    f"conversation {self.conversation_id!r}: timestamps decrease at turn {t.turn_id}"
                )
            last_ts[t.session_id] = t.timestamp

    def turn(self, turn_id: int) -> Turn:
        for t in self.turns:
            if t.turn_id == turn_id:
                return t
        raise KeyError(turn_id)

    def history_through(self, turn_id: int) -> tuple[Turn, ...]:
        """Turns up to and including ``turn_id``."""
        return tuple(t for t in self.turns if t.turn_id <= turn_id)

    @property
    def final_timestamp(self) -> int:
        return max(t.timestamp for t in self.turns)


@dataclass(frozen=True)
class CandidateMemory:
    candidate_id: str
    text: str
    source_turn_ids: tuple[int, ...]
    speaker: str
    event_time: int
    gold_label: Optional[bool] = None
    conversation_id: str = ""
    unresolved: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InputError(f"candidate {self.candidate_id} has empty text")
        if not self.source_turn_ids:
            raise InputError(f"candidate {self.candidate_id} has no source turns")

    @property
    def last_source_turn(self) -> int:
        return max(self.source_turn_ids)


@dataclass(frozen=True)
class FeatureVector:
    utility: float
    confidence: float
    novelty: float
    recency: float
    type_prior: float

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise InputError(f"feature {name}={v!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.utility, self.confidence, self.novelty, self.recency, self.type_prior)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.as_tuple()))

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls(**{name: float(d[name]) for name in FEATURE_NAMES})

    @classmethod
    def rounded(cls, *values: float) -> "FeatureVector":
        return cls(*(round(float(v), FEATURE_DECIMALS) for v in values))


@dataclass(frozen=True)
class AdmissionPolicy:
    """Weights on the 5-simplex (feature order: ``FEATURE_NAMES``) plus a threshold.

    Thresholds above 1 are accepted: they are the "admit nothing" setting
    used by sweeps and smoke runs.
    """

    weights: tuple[float, float, float, float, float]
    threshold: float

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if len(w) != len(FEATURE_NAMES):
            raise InputError(f"expected {len(FEATURE_NAMES)} weights, got {len(w)}")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise InputError(f"weights must be non-negative: {w}")
        if abs(sum(w) - 1.0) > SIMPLEX_TOL:
            raise InputError(f"weights must sum to 1, got {sum(w)!r}")
        if not (math.isfinite(self.threshold) and self.threshold >= 0.0):
            raise InputError(f"threshold must be a finite non-negative number, got {self.threshold!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "threshold", float(self.threshold))

    @classmethod
    def uniform(cls, threshold: float = 0.5) -> "AdmissionPolicy":
        return cls((0.2,) * 5, threshold)

    def admits(self, score: float) -> bool:
        return score >= self.threshold


@dataclass(frozen=True)
class AdmissionDecision:
    candidate_id: str
    outcome: Outcome
    score: float
    features: Optional[FeatureVector]
    conflict_id: Optional[str] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.UPDATED and self.conflict_id is None:
            raise InputError("an Updated decision must name the entry it merged into")

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "outcome": self.outcome.value,
            "score": self.score,
            "features": self.features.to_dict() if self.features is not None else None,
            "conflict_id": self.conflict_id,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdmissionDecision":
        feats = d.get("features")
        return cls(
            candidate_id=d["candidate_id"],
            outcome=Outcome(d["outcome"]),
            score=float(d["score"]),
            features=FeatureVector.from_dict(feats) if feats is not None else None,
            conflict_id=d.get("conflict_id"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class ClassificationMetrics:
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int
    precision: float
    recall: float
    f1: float
    admitted: int

    @property
    def total(self) -> int:
        return self.true_pos + self.false_pos + self.false_neg + self.true_neg


def aggregate_score(features: FeatureVector, policy: AdmissionPolicy) -> float:
    """Weighted sum of the five signals, rounded to ``SCORE_DECIMALS``."""
    s = math.fsum(w * f for w, f in zip(policy.weights, features.as_tuple()))
    return round(s, SCORE_DECIMALS)


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> ClassificationMetrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return ClassificationMetrics(
        true_pos=tp,
        false_pos=fp,
        false_neg=fn,
        true_neg=tn,
        precision=precision,
        recall=recall,
        f1=f1_from_pr(precision, recall),
        admitted=tp + fp,
    )


def compute_metrics(decisions: Sequence[bool], labels: Sequence[bool]) -> ClassificationMetrics:
    if len(decisions) != len(labels):
        raise InputError(f"length mismatch: {len(decisions)} decisions vs {len(labels)} labels")
    if not decisions:
        raise InputError("cannot compute metrics on an empty list")
    tp = fp = fn = tn = 0
    for d, y in zip(decisions, labels):
        if d and y:
            tp += 1
        elif d:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(tp, fp, fn, tn)


def check_simplex(weights: Iterable[float]) -> bool:
    w = list(weights)
    return all(x >= 0 for x in w) and abs(sum(w) - 1.0) <= SIMPLEX_TOL
