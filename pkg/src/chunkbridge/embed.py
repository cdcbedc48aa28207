"""Embeddings: deterministic feature hashing, plus a remote HTTP provider.

The default embedder needs no model files or network: each token hashes to
a dimension and a sign, the counts accumulate, and the vector is
L2-normalized. Identical text always embeds identically, which is what the
determinism guarantees of the index build rely on.
"""

from __future__ import annotations

import threading
from typing import Sequence

import httpx
import numpy as np

from .hashing import EMBED_KEY, hash64
from .text import tokenize


class EmbeddingError(RuntimeError):
    """Embedding provider failure; retryable signals a transient cause."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


def basis_vector(dim: int) -> np.ndarray:
    """Unit vector e0, the embedding of token-free text."""
    v = np.zeros(dim, dtype=np.float32)
    v[0] = 1.0
    return v


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 when either is zero."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a.astype(np.float64)))
    nb = float(np.linalg.norm(b.astype(np.float64)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)) / (na * nb))


class HashingEmbedder:
    """Feature-hashing bag-of-tokens embedder, deterministic by design.

    Token t contributes +-1 (sign from a high hash bit) to dimension
    hash(t) mod dim; the sum is L2-normalized to float32. Text with no
    tokens maps to the basis vector e0.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._token_cache: dict[str, tuple[int, float]] = {}

    def _feature(self, token: str) -> tuple[int, float]:
        cached = self._token_cache.get(token)
        if cached is None:
            h = hash64(token, key=EMBED_KEY)
            cached = (h % self.dim, 1.0 if h >> 63 else -1.0)
            self._token_cache[token] = cached
        return cached

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return basis_vector(self.dim)
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            idx, sign = self._feature(token)
            acc[idx] += sign
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            return basis_vector(self.dim)
        return (acc / norm).astype(np.float32)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed(text)
        return out


class RemoteEmbedder:
    """Client for an external embedding service.

    POSTs {"texts": [...]} and expects {"vectors": [[...], ...]} back, one
    float32 row per input, which is then L2-normalized. In-flight requests
    are bounded by a semaphore. Transport errors and 5xx responses raise
    EmbeddingError(retryable=True); malformed payloads and 4xx responses
    are not retryable.
    """

    def __init__(
        self,
        endpoint: str,
        dim: int,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.endpoint = endpoint
        self.dim = dim
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=timeout)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        with self._sem:
            try:
                response = self._client.post(self.endpoint, json={"texts": list(texts)})
            except httpx.HTTPError as exc:
                raise EmbeddingError(f"embedding request failed: {exc}", retryable=True) from exc
        if response.status_code != 200:
            raise EmbeddingError(
                f"embedding service returned HTTP {response.status_code}",
                retryable=response.status_code >= 500,
            )
        try:
            vectors = response.json()["vectors"]
            arr = np.asarray(vectors, dtype=np.float32)
        except (KeyError, ValueError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if arr.shape != (len(texts), self.dim):
            raise EmbeddingError(
                f"expected {(len(texts), self.dim)} vectors, got {arr.shape}"
            )
        norms = np.linalg.norm(arr.astype(np.float64), axis=1)
        out = np.empty_like(arr)
        for i, norm in enumerate(norms):
            out[i] = basis_vector(self.dim) if norm == 0.0 else (arr[i] / norm)
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]
