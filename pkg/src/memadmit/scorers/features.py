"""Confidence, novelty and recency signals, and five-signal assembly."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional, Protocol, Sequence

import numpy as np

from memadmit.core import FEATURE_NAMES, CandidateMemory, ContentType, FeatureVector, InputError, Turn
from memadmit.ingest import addressee_for, resolve_references
from memadmit.scorers.providers import EmbeddingProvider, HashingEmbedder
from memadmit.scorers.text import content_tokens, rouge_l, tokenize
from memadmit.scorers.typeprior import DEFAULT_TYPE_PRIORS, score_type_prior
from memadmit.scorers.utility import ScoringError, UtilityScorer, heuristic_utility

DEFAULT_LAMBDA_PER_HOUR = 0.01
DEFAULT_SUPPORT_K = 5


class SupportsEmbeddings(Protocol):
    def embedding_matrix(self) -> np.ndarray: ...


@dataclass(frozen=True)
class RecencyParams:
    now: float
    lam: float = DEFAULT_LAMBDA_PER_HOUR

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise InputError(f"decay rate must be positive, got {self.lam}")


def score_recency(candidate: CandidateMemory, params: RecencyParams) -> float:
    elapsed = params.now - candidate.event_time
    if elapsed < 0:
        raise InputError(
            f"reference time {params.now} precedes event time {candidate.event_time} "
            f"for candidate {candidate.candidate_id}"
        )
    return math.exp(-params.lam * (elapsed / 3600.0))


@lru_cache(maxsize=65536)
def _resolved(text: str, speaker: str, addressee: Optional[str], timestamp: int) -> str:
    return resolve_references(text, speaker, addressee, timestamp)[0]


def turn_surfaces(turn: Turn, history: Sequence[Turn]) -> tuple[str, str]:
    """A turn as spoken, and with its speaker pronouns and dates resolved."""
    return turn.text, _resolved(turn.text, turn.speaker, addressee_for(turn, history), turn.timestamp)


def support_spans(candidate: CandidateMemory, history: Sequence[Turn], k: int = DEFAULT_SUPPORT_K) -> list[Turn]:
    """Source turns plus the ``k`` turns sharing the most content tokens with the candidate."""
    sources = set(candidate.source_turn_ids)
    picked = [t for t in history if t.turn_id in sources]
    if k > 0:
        cand = set(content_tokens(candidate.text))
        scored = []
        for t in history:
            if t.turn_id in sources:
                continue
            raw, resolved = turn_surfaces(t, history)
            overlap = len(cand & (set(content_tokens(raw)) | set(content_tokens(resolved))))
            if overlap > 0:
                scored.append((-overlap, t.turn_id, t))
        scored.sort(key=lambda x: (x[0], x[1]))
        picked.extend(t for _, _, t in scored[:k])
    return sorted(picked, key=lambda t: t.turn_id)


def score_confidence(candidate: CandidateMemory, history: Sequence[Turn], k: int = DEFAULT_SUPPORT_K) -> float:
    """Max ROUGE-L between the candidate and its support turns.

    Each turn is compared both as spoken and with references resolved, since
    candidates carry speaker names where the turn says "I".
    """
    cand = tokenize(candidate.text)
    best = 0.0
    for t in support_spans(candidate, history, k):
        for surface in turn_surfaces(t, history):
            best = max(best, rouge_l(cand, tokenize(surface)))
    return best


def max_cosine(embedding: np.ndarray, matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0:
        return 0.0
    sims = matrix @ embedding
    return float(np.clip(sims, 0.0, 1.0).max())


def score_novelty(
    candidate: CandidateMemory,
    store: SupportsEmbeddings,
    provider: EmbeddingProvider,
    embedding: Optional[np.ndarray] = None,
) -> float:
    """1 - max cosine to stored memories (negative cosines count as 0); 1.0 for an empty store."""
    if embedding is None:
        embedding = provider.embed([candidate.text])[0]
    matrix = store.embedding_matrix()
    if matrix.shape[0] == 0:
        return 1.0
    return 1.0 - max_cosine(embedding, matrix)


@dataclass(frozen=True)
class FeatureResult:
    features: FeatureVector
    embedding: np.ndarray
    timings: Mapping[str, float]  # seconds per feature


@dataclass
class FeatureExtractor:
    """Everything needed to compute the five signals for one candidate.

    ``utility=None`` selects ``heuristic_utility``.
    """

    utility: Optional[UtilityScorer | Callable[[CandidateMemory], float]] = None
    embedder: EmbeddingProvider = field(default_factory=HashingEmbedder)
    type_priors: Mapping[ContentType, float] = field(default_factory=lambda: dict(DEFAULT_TYPE_PRIORS))
    recency_lambda: float = DEFAULT_LAMBDA_PER_HOUR
    support_k: int = DEFAULT_SUPPORT_K
    concurrent: bool = False
    _pool: Optional[ThreadPoolExecutor] = field(default=None, init=False, repr=False)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return self.embedder.embed(list(texts))

    def _utility(self, candidate: CandidateMemory) -> float:
        if self.utility is None:
            return heuristic_utility(candidate)
        return self.utility(candidate)

    def compute(
        self,
        candidate: CandidateMemory,
        history: Sequence[Turn],
        store: SupportsEmbeddings,
        now: float,
        embedding: Optional[np.ndarray] = None,
    ) -> FeatureResult:
        history = tuple(history)
        params = RecencyParams(now=now, lam=self.recency_lambda)
        holder: dict[str, np.ndarray] = {}
        if embedding is not None:
            holder["embedding"] = embedding

        def novelty() -> float:
            if "embedding" not in holder:
                holder["embedding"] = self.embed([candidate.text])[0]
            return score_novelty(candidate, store, self.embedder, holder["embedding"])

        jobs: dict[str, Callable[[], float]] = {
            "utility": lambda: self._utility(candidate),
            "confidence": lambda: score_confidence(candidate, history, self.support_k),
            "novelty": novelty,
            "recency": lambda: score_recency(candidate, params),
            "type_prior": lambda: score_type_prior(candidate, self.type_priors),
        }

        def timed(name: str) -> tuple[float, float]:
            start = time.perf_counter()
            try:
                value = jobs[name]()
            except ScoringError:
                raise
            except Exception as exc:
                raise ScoringError(name, candidate.candidate_id, f"{type(exc).__name__}: {exc}") from exc
            return value, time.perf_counter() - start

        if self.concurrent:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=len(FEATURE_NAMES), thread_name_prefix="feature")
            futures = {name: self._pool.submit(timed, name) for name in FEATURE_NAMES}
            results = {name: futures[name].result() for name in FEATURE_NAMES}
        else:
            results = {name: timed(name) for name in FEATURE_NAMES}

        features = FeatureVector.rounded(*(results[name][0] for name in FEATURE_NAMES))
        return FeatureResult(
            features=features,
            embedding=holder["embedding"],
            timings={name: results[name][1] for name in FEATURE_NAMES},
        )

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def compute_features(
    candidate: CandidateMemory,
    history: Sequence[Turn],
    store: SupportsEmbeddings,
    extractor: FeatureExtractor,
    now: float,
) -> FeatureResult:
    return extractor.compute(candidate, history, store, now)
