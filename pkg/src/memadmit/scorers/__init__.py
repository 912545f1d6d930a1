"""The five admission signals and the providers behind them."""

from memadmit.scorers.cache import ScoreCache
from memadmit.scorers.features import (
    FeatureExtractor,
    FeatureResult,
    RecencyParams,
    compute_features,
    score_confidence,
    score_novelty,
    score_recency,
    support_spans,
)
from memadmit.scorers.providers import (
    EmbeddingProvider,
    HashingEmbedder,
    HttpEmbeddingProvider,
    HttpUtilityProvider,
    LookupEmbedder,
    ProviderError,
    StubUtilityProvider,
    UtilityProvider,
)
from memadmit.scorers.text import rouge_l, tokenize
from memadmit.scorers.typeprior import DEFAULT_TYPE_PRIORS, classify_type, score_type_prior
from memadmit.scorers.utility import ScoringError, UtilityScorer, heuristic_utility, score_utility

__all__ = [
    "DEFAULT_TYPE_PRIORS",
    "EmbeddingProvider",
    "FeatureExtractor",
    "FeatureResult",
    "HashingEmbedder",
    "HttpEmbeddingProvider",
    "HttpUtilityProvider",
    "LookupEmbedder",
    "ProviderError",
    "RecencyParams",
    "ScoreCache",
    "ScoringError",
    "StubUtilityProvider",
    "UtilityProvider",
    "UtilityScorer",
    "classify_type",
    "compute_features",
    "heuristic_utility",
    "rouge_l",
    "score_confidence",
    "score_novelty",
    "score_recency",
    "score_type_prior",
    "score_utility",
    "support_spans",
    "tokenize",
]
