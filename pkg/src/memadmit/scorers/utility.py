"""Utility signal: one provider call per distinct candidate text, cached.

``heuristic_utility`` is the provider-free fallback. Its formula:

    0.30 base
  + 0.40 if a preference / plan / constraint keyword is present
  + 0.15 if a capitalized token appears after the first word (named-entity proxy)
  + 0.15 if the text contains a number
  - 0.20 if at least half of the tokens are acknowledgments or filler
  clipped to [0, 1]
"""

from __future__ import annotations

import logging
import re
import threading
from typing import Optional

from memadmit.core import CandidateMemory
from memadmit.scorers.cache import ScoreCache
from memadmit.scorers.prompt import PROMPT_VERSION, render_prompt
from memadmit.scorers.providers import ProviderError, UtilityProvider
from memadmit.scorers.text import tokenize

logger = logging.getLogger(__name__)

RATING_MAX = 10
_INT = re.compile(r"[-+]?\d+")


class ScoringError(RuntimeError):
    def __init__(self, feature: str, candidate_id: str, message: str):
        self.feature = feature
        self.candidate_id = candidate_id
        super().__init__(f"{feature} scoring failed for candidate {candidate_id}: {message}")


def parse_rating(reply: str) -> Optional[int]:
    m = _INT.search(reply)
    return int(m.group()) if m else None


class UtilityScorer:
    """Provider + cache pair. Counts clamped (out-of-range) ratings."""

    feature = "utility"

    def __init__(self, provider: UtilityProvider, cache: Optional[ScoreCache] = None, parse_retries: int = 1):
        self.provider = provider
        self.cache = cache if cache is not None else ScoreCache()
        self.parse_retries = parse_retries
        self.clamped = 0
        self._lock = threading.Lock()

    @property
    def version(self) -> str:
        return f"{PROMPT_VERSION}:{self.provider.model_id}"

    def _rate(self, candidate: CandidateMemory) -> int:
        prompt = render_prompt(candidate.text)
        for attempt in range(self.parse_retries + 1):
            try:
                reply = self.provider.complete(prompt)
            except ProviderError as exc:
                raise ScoringError(self.feature, candidate.candidate_id, str(exc)) from exc
            rating = parse_rating(reply)
            if rating is not None:
                if not 0 <= rating <= RATING_MAX:
                    with self._lock:
                        self.clamped += 1
                    logger.warning("utility rating %d out of range for %s; clamped", rating, candidate.candidate_id)
                    rating = min(max(rating, 0), RATING_MAX)
                return rating
            logger.warning("unparseable utility reply %r (attempt %d)", reply[:80], attempt + 1)
        raise ScoringError(self.feature, candidate.candidate_id, "provider reply contained no integer rating")

    def __call__(self, candidate: CandidateMemory) -> float:
        version = self.version
        cached = self.cache.get(self.feature, candidate.text, version)
        if cached is not None:
            return cached
        with self.cache.key_lock(self.feature, candidate.text, version):
            cached = self.cache.get(self.feature, candidate.text, version)
            if cached is not None:
                return cached
            score = self._rate(candidate) / RATING_MAX
            self.cache.put(self.feature, candidate.text, version, score)
            return score


def score_utility(candidate: CandidateMemory, provider: UtilityProvider | UtilityScorer,
                  cache: Optional[ScoreCache] = None) -> float:
    scorer = provider if isinstance(provider, UtilityScorer) else UtilityScorer(provider, cache)
    return scorer(candidate)


_CUE = re.compile(
    r"\b(allerg\w*|loves?|hates?|prefers?|preference|favou?rite|likes?|dislikes?|vegetarian|vegan|"
    r"needs?|must|can't|cannot|never|always|plans?|planning|goals?|deadline|appointment|"
    r"birthday|anniversary|scheduled?|wants?|intends?|remember|remind|important|"
    r"works? (?:at|for|as)|lives? in|moved to)\b",
    re.IGNORECASE,
)
_ACK = frozenset("ok okay sounds good sure yes yeah yep thanks cool nice great lol haha hmm fine alright right".split())

HEURISTIC_BASE = 0.3


def heuristic_utility(candidate: CandidateMemory | str) -> float:
    text = candidate.text if isinstance(candidate, CandidateMemory) else candidate
    score = HEURISTIC_BASE
    if _CUE.search(text):
        score += 0.4
    words = text.split()
    if any(w[:1].isupper() for w in words[1:]):
        score += 0.15
    if re.search(r"\d", text):
        score += 0.15
    toks = tokenize(text)
    if toks and sum(t in _ACK for t in toks) * 2 >= len(toks):
        score -= 0.2
    return round(min(max(score, 0.0), 1.0), 12)
