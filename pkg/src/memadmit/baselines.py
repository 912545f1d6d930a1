"""Comparison admission rules scored on frozen features.

MemGPT-like and MemoryBank-like are linear re-implementations over this
engine's signals (utility stands in for LLM-judged importance, confidence for
relevance). Their default weights are declared here, not taken from the
original systems.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from memadmit.core import SCORE_DECIMALS, AdmissionPolicy, InputError, aggregate_score
from memadmit.policy import LabeledExample

BASELINE_NAMES = ("Random", "EqualWeights", "MemGptLike", "MemoryBankLike")


def _check_weights(weights: Sequence[float], n: int) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if len(w) != n or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise InputError(f"expected {n} non-negative weights summing to 1, got {w}")
    return w


def _threshold(scores: Sequence[float], theta: float) -> list[bool]:
    return [round(s, SCORE_DECIMALS) >= theta for s in scores]


def baseline_random(examples: Sequence[LabeledExample], p: float = 0.3, seed: int = 0) -> list[bool]:
    if not 0.0 <= p <= 1.0:
        raise InputError(f"admission probability must lie in [0, 1], got {p}")
    rng = random.Random(seed)
    return [rng.random() < p for _ in examples]


def baseline_equal_weights(examples: Sequence[LabeledExample], theta: float = 0.5) -> list[bool]:
    policy = AdmissionPolicy.uniform(theta)
    return [policy.admits(aggregate_score(e.features, policy)) for e in examples]


def memgpt_scores(examples: Sequence[LabeledExample], w_recency: float = 0.5, w_importance: float = 0.5) -> list[float]:
    wr, wi = _check_weights((w_recency, w_importance), 2)
    return [math.fsum((wr * e.features.recency, wi * e.features.utility)) for e in examples]


def baseline_memgpt_like(
    examples: Sequence[LabeledExample], w_recency: float = 0.5, w_importance: float = 0.5, theta: float = 0.5
) -> list[bool]:
    return _threshold(memgpt_scores(examples, w_recency, w_importance), theta)


def memorybank_scores(
    examples: Sequence[LabeledExample], weights3: Sequence[float] = (1 / 3, 1 / 3, 1 / 3)
) -> list[float]:
    w1, w2, w3 = _check_weights(weights3, 3)
    return [
        math.fsum((w1 * e.features.recency, w2 * e.features.confidence, w3 * e.features.utility)) for e in examples
    ]


def baseline_memorybank_like(
    examples: Sequence[LabeledExample],
    weights3: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    theta: float = 0.5,
) -> list[bool]:
    return _threshold(memorybank_scores(examples, weights3), theta)


@dataclass(frozen=True)
class BaselineSpec:
    name: str
    parameters: Mapping[str, Any] = field(default_factory=dict)

    _ALLOWED = {
        "Random": {"p", "seed"},
        "EqualWeights": {"theta"},
        "MemGptLike": {"w_recency", "w_importance", "theta"},
        "MemoryBankLike": {"weights", "theta"},
    }

    def __post_init__(self) -> None:
        if self.name not in self._ALLOWED:
            raise InputError(f"unknown baseline {self.name!r}; expected one of {BASELINE_NAMES}")
        unknown = set(self.parameters) - self._ALLOWED[self.name]
        if unknown:
            raise InputError(f"baseline {self.name}: unknown parameters {sorted(unknown)}")
        if self.name == "Random" and "seed" not in self.parameters:
            raise InputError("the Random baseline needs an explicit seed")

    def decide(self, examples: Sequence[LabeledExample]) -> list[bool]:
        p = dict(self.parameters)
        if self.name == "Random":
            return baseline_random(examples, float(p.get("p", 0.3)), int(p["seed"]))
        if self.name == "EqualWeights":
            return baseline_equal_weights(examples, float(p.get("theta", 0.5)))
        if self.name == "MemGptLike":
            return baseline_memgpt_like(
                examples, float(p.get("w_recency", 0.5)), float(p.get("w_importance", 0.5)), float(p.get("theta", 0.5))
            )
        return baseline_memorybank_like(
            examples, tuple(p.get("weights", (1 / 3, 1 / 3, 1 / 3))), float(p.get("theta", 0.5))
        )

    @property
    def features_used(self) -> tuple[str, ...]:
        return {
            "Random": (),
            "EqualWeights": ("utility", "confidence", "novelty", "recency", "type_prior"),
            "MemGptLike": ("recency", "utility"),
            "MemoryBankLike": ("recency", "confidence", "utility"),
        }[self.name]


def default_baselines(seed: int = 0) -> list[BaselineSpec]:
    return [
        BaselineSpec("Random", {"p": 0.3, "seed": seed}),
        BaselineSpec("MemGptLike", {"w_recency": 0.5, "w_importance": 0.5, "theta": 0.5}),
        BaselineSpec("MemoryBankLike", {"weights": [1 / 3, 1 / 3, 1 / 3], "theta": 0.5}),
        BaselineSpec("EqualWeights", {"theta": 0.5}),
    ]
