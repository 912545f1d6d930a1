"""Utility and embedding providers: HTTP clients and deterministic stubs.

Wire protocol (JSON over HTTP POST):

    utility    {"prompt": str, "deterministic": true}  ->  {"text": str}
    embedding  {"input": [str, ...]}                    ->  {"vectors": [[float, ...], ...]}
"""

from __future__ import annotations

import hashlib
import logging
import threading
import time
from typing import Callable, Mapping, Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from memadmit.scorers.prompt import candidate_text_from_prompt
from memadmit.scorers.text import tokenize

logger = logging.getLogger(__name__)

DEFAULT_EMBEDDING_DIM = 256


class ProviderError(RuntimeError):
    """A provider could not be reached or returned an unusable response."""


@runtime_checkable
class UtilityProvider(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    model_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def unit_normalize(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise ProviderError("embedding provider returned a zero or non-finite vector")
    return vectors / norms


class _HttpClient:
    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 1, max_in_flight: int = 8):
        if not endpoint:
            raise ProviderError("no endpoint configured")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def post(self, payload: dict) -> dict:
        last: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                with self._slots:
                    resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()
            except (requests.RequestException, ValueError) as exc:
                last = exc
                logger.warning("POST %s failed (attempt %d): %s", self.endpoint, attempt + 1, exc)
        raise ProviderError(f"{self.endpoint} unreachable after {self.retries + 1} attempts: {last}")


class HttpUtilityProvider:
    def __init__(self, endpoint: str, *, model_id: str = "remote", timeout: float = 30.0,
                 retries: int = 1, max_in_flight: int = 8):
        self.model_id = model_id
        self._client = _HttpClient(endpoint, timeout, retries, max_in_flight)

    def complete(self, prompt: str) -> str:
        body = self._client.post({"prompt": prompt, "deterministic": True})
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise ProviderError("utility response missing 'text'")
        return text


class HttpEmbeddingProvider:
    def __init__(self, endpoint: str, dim: int, *, model_id: str = "remote", timeout: float = 30.0,
                 retries: int = 1, max_in_flight: int = 8):
        self.model_id = model_id
        self.dim = dim
        self._client = _HttpClient(endpoint, timeout, retries, max_in_flight)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = self._client.post({"input": list(texts)})
        vectors = body.get("vectors") if isinstance(body, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError("embedding response must hold one vector per input")
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ProviderError(f"expected vectors of dimension {self.dim}, got shape {arr.shape}")
        return unit_normalize(arr)


def _digest_int(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class HashingEmbedder:
    """Feature-hashed unigrams and bigrams, L2-normalized. No model required."""

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM):
        self.dim = dim
        self.model_id = f"hashing-{dim}"

    def _one(self, text: str) -> np.ndarray:
        toks = tokenize(text) or ["<empty>"]
        feats = toks + [f"{a} {b}" for a, b in zip(toks, toks[1:])]
        vec = np.zeros(self.dim)
        for f in feats:
            vec[_digest_int(f) % self.dim] += 1.0
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return unit_normalize(np.stack([self._one(t) for t in texts]))


class LookupEmbedder:
    """Fixed text -> vector table, falling back to hashing for unknown texts."""

    def __init__(self, table: Mapping[str, Sequence[float]], dim: Optional[int] = None):
        vecs = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape[0] for v in vecs.values()}
        if dim is None:
            if len(dims) != 1:
                raise ValueError("lookup vectors must share one dimension")
            dim = dims.pop()
        self.dim = dim
        self.model_id = f"lookup-{dim}"
        self._table = {k: unit_normalize(v) for k, v in vecs.items()}
        self._fallback = HashingEmbedder(dim)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        rows = [self._table[t] if t in self._table else self._fallback.embed([t])[0] for t in texts]
        return np.stack(rows)


class StubUtilityProvider:
    """Offline utility provider with a call counter.

    ``responder`` maps prompt-embedded candidate text to the raw reply. Texts
    it does not cover get a rating derived from a stable hash of the text,
    which behaves like an uninformative model. ``delay`` (seconds) simulates
    inference latency.
    """

    def __init__(
        self,
        responder: Callable[[str], str] | Mapping[str, str] | str | None = None,
        *,
        delay: float = 0.0,
        model_id: str = "stub",
    ):
        self.model_id = model_id
        self.delay = delay
        self._responder = responder
        self._lock = threading.Lock()
        self.calls = 0
        self.prompts: list[str] = []

    def _reply(self, text: str) -> str:
        r = self._responder
        if isinstance(r, str):
            return r
        if callable(r):
            return r(text)
        if r is not None and text in r:
            return r[text]
        return str(_digest_int(text) % 11)

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
            self.prompts.append(prompt)
        if self.delay:
            time.sleep(self.delay)
        return self._reply(candidate_text_from_prompt(prompt))
