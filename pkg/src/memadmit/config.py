"""Engine configuration: one YAML/JSON file, validated in full up front.

Precedence is command-line flags over file values over the defaults below.
Unknown keys anywhere in the file are an error.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from memadmit.admission import DEFAULT_CONFLICT_SIMILARITY
from memadmit.baselines import BaselineSpec, default_baselines
from memadmit.core import ContentType, InputError
from memadmit.policy import GridConfig
from memadmit.scorers.cache import ScoreCache
from memadmit.scorers.features import DEFAULT_LAMBDA_PER_HOUR, DEFAULT_SUPPORT_K, FeatureExtractor
from memadmit.scorers.providers import (
    DEFAULT_EMBEDDING_DIM,
    HashingEmbedder,
    HttpEmbeddingProvider,
    HttpUtilityProvider,
    LookupEmbedder,
    StubUtilityProvider,
)
from memadmit.scorers.typeprior import DEFAULT_TYPE_PRIORS, parse_type_priors
from memadmit.scorers.utility import UtilityScorer

PROVIDER_MODES = ("remote", "stub", "heuristic")


class ConfigError(InputError):
    """The configuration file or flag combination is invalid."""


DEFAULTS: dict[str, Any] = {
    "provider": {
        "mode": "stub",
        "utility_endpoint": None,
        "embedding_endpoint": None,
        "embedding_dim": DEFAULT_EMBEDDING_DIM,
        "model_id": "remote",
        "timeout": 30.0,
        "retries": 1,
        "max_in_flight": 8,
        "stub_delay_ms": 0.0,
        "stub_ratings": {},  # candidate text -> fixed 0-10 rating
        "stub_embeddings": {},  # candidate text -> fixed vector (normalized on load)
    },
    "recency_lambda": DEFAULT_LAMBDA_PER_HOUR,
    "support_k": DEFAULT_SUPPORT_K,
    "type_priors": {t.value: p for t, p in DEFAULT_TYPE_PRIORS.items()},
    "conflict_similarity": DEFAULT_CONFLICT_SIMILARITY,
    "grid": {"weight_step": 0.1, "theta_min": 0.30, "theta_max": 0.60, "theta_step": 0.05, "folds": 5},
    "split": [0.70, 0.15, 0.15],
    "baselines": None,  # None selects the built-in four
    "seed": 0,
    "jobs": 1,
    "paths": {"dataset": None, "store": None, "cache": None, "output": "out"},
}


def _merge(base: dict, override: Mapping, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {path!r} must be a mapping")
            if key in ("type_priors", "stub_ratings", "stub_embeddings"):
                out[key] = dict(value)
            else:
                out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class EngineConfig:
    raw: Mapping[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self) -> None:
        self.validate()

    # construction

    @classmethod
    def load(cls, path: Optional[str | Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> "EngineConfig":
        doc: Mapping[str, Any] = {}
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            try:
                doc = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
            if not isinstance(doc, Mapping):
                raise ConfigError(f"config {path} must contain a mapping at top level")
        merged = _merge(DEFAULTS, doc)
        if overrides:
            merged = _merge(merged, _nest(overrides))
        return cls(merged)

    def with_overrides(self, **overrides: Any) -> "EngineConfig":
        return EngineConfig(_merge(dict(self.raw), _nest({k: v for k, v in overrides.items() if v is not None})))

    # validation

    def validate(self) -> None:
        try:
            self._validate()
        except ConfigError:
            raise
        except (InputError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def _validate(self) -> None:
        r = self.raw
        if self.provider_mode not in PROVIDER_MODES:
            raise ConfigError(f"provider.mode must be one of {PROVIDER_MODES}, got {self.provider_mode!r}")
        prov = r["provider"]
        if self.provider_mode == "remote":
            missing = [k for k in ("utility_endpoint", "embedding_endpoint") if not prov.get(k)]
            if missing:
                raise ConfigError(f"remote provider mode needs {', '.join('provider.' + m for m in missing)}")
        for key in ("embedding_dim", "retries", "max_in_flight"):
            if not isinstance(prov[key], int) or prov[key] < (0 if key == "retries" else 1):
                raise ConfigError(f"provider.{key} must be a positive integer")
        if float(prov["stub_delay_ms"]) < 0 or float(prov["timeout"]) <= 0:
            raise ConfigError("provider.stub_delay_ms must be >= 0 and provider.timeout > 0")
        if not float(r["recency_lambda"]) > 0:
            raise ConfigError("recency_lambda must be positive")
        if not isinstance(r["support_k"], int) or r["support_k"] < 0:
            raise ConfigError("support_k must be a non-negative integer")
        if not 0.0 < float(r["conflict_similarity"]) <= 1.0:
            raise ConfigError("conflict_similarity must lie in (0, 1]")
        for text, rating in prov["stub_ratings"].items():
            if not isinstance(rating, int):
                raise ConfigError(f"provider.stub_ratings[{text!r}] must be an integer")
        dims = {len(v) for v in prov["stub_embeddings"].values()}
        if dims and dims != {prov["embedding_dim"]}:
            raise ConfigError("provider.stub_embeddings vectors must have dimension provider.embedding_dim")
        if not isinstance(r["seed"], int) or not isinstance(r["jobs"], int) or r["jobs"] < 1:
            raise ConfigError("seed must be an integer and jobs a positive integer")
        split = r["split"]
        if (not isinstance(split, (list, tuple)) or len(split) != 3 or any(float(x) <= 0 for x in split)
                or abs(sum(float(x) for x in split) - 1.0) > 1e-9):
            raise ConfigError(f"split must be three positive ratios summing to 1, got {split!r}")
        self.type_priors
        self.grid
        self.baselines

    # typed views

    @property
    def provider_mode(self) -> str:
        return self.raw["provider"]["mode"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def jobs(self) -> int:
        return int(self.raw["jobs"])

    @property
    def split(self) -> tuple[float, float, float]:
        a, b, c = (float(x) for x in self.raw["split"])
        return (a, b, c)

    @property
    def type_priors(self) -> dict[ContentType, float]:
        return parse_type_priors(self.raw["type_priors"])

    @property
    def grid(self) -> GridConfig:
        return GridConfig(**self.raw["grid"], seed=self.seed)

    @property
    def baselines(self) -> list[BaselineSpec]:
        specs = self.raw["baselines"]
        if specs is None:
            return default_baselines(self.seed)
        if not isinstance(specs, list):
            raise ConfigError("baselines must be a list of {name, parameters} mappings")
        out = []
        for s in specs:
            if not isinstance(s, Mapping) or set(s) - {"name", "parameters"}:
                raise ConfigError(f"invalid baseline entry {s!r}")
            out.append(BaselineSpec(s["name"], dict(s.get("parameters") or {})))
        return out

    def path(self, name: str) -> Optional[str]:
        return self.raw["paths"][name]

    @property
    def conflict_similarity(self) -> float:
        return float(self.raw["conflict_similarity"])

    def content_hash(self) -> str:
        """Hash of every setting that can change results (output path excluded)."""
        doc = copy.deepcopy(dict(self.raw))
        doc["paths"] = {k: v for k, v in doc["paths"].items() if k != "output"}
        doc.pop("jobs", None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # providers

    def build_extractor(self, *, concurrent: bool = False) -> FeatureExtractor:
        prov = self.raw["provider"]
        mode = self.provider_mode
        utility = None
        dim = int(prov["embedding_dim"])
        embedder = LookupEmbedder(prov["stub_embeddings"], dim) if prov["stub_embeddings"] else HashingEmbedder(dim)
        if mode in ("stub", "remote"):
            cache = ScoreCache(self.path("cache"))
            if mode == "stub":
                ratings = {t: str(r) for t, r in prov["stub_ratings"].items()}
                provider = StubUtilityProvider(ratings, delay=float(prov["stub_delay_ms"]) / 1000.0)
            else:
                kw = dict(model_id=prov["model_id"], timeout=float(prov["timeout"]),
                          retries=int(prov["retries"]), max_in_flight=int(prov["max_in_flight"]))
                provider = HttpUtilityProvider(prov["utility_endpoint"], **kw)
                embedder = HttpEmbeddingProvider(prov["embedding_endpoint"], int(prov["embedding_dim"]), **kw)
            utility = UtilityScorer(provider, cache)
        return FeatureExtractor(
            utility=utility,
            embedder=embedder,
            type_priors=self.type_priors,
            recency_lambda=float(self.raw["recency_lambda"]),
            support_k=int(self.raw["support_k"]),
            concurrent=concurrent,
        )


def _nest(flat: Mapping[str, Any]) -> dict:
    """``{"provider.mode": "stub"}`` -> ``{"provider": {"mode": "stub"}}``."""
    out: dict = {}
    for key, value in flat.items():
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out
