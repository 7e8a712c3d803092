"""Embedding clients and batched chunk embedding."""

from __future__ import annotations

import hashlib
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence

import numpy as np

from .chunking import Chunk
from .errors import DimensionMismatch, TransportError
from .http import post_json

log = logging.getLogger(__name__)

EMBEDDING_DIM = 1536


class EmbeddingClient(Protocol):
    def dimension(self) -> int: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def mock_embed(text: str, seed: int = 0, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Unit-norm float32 vector drawn from a generator seeded by a digest of (seed, text)."""
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


class MockEmbeddingClient:
    def __init__(self, seed: int = 0, dim: int = EMBEDDING_DIM):
        self.seed = seed
        self.dim = dim
        self.calls = 0
        self._lock = threading.Lock()

    def dimension(self) -> int:
        return self.dim

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        with self._lock:
            self.calls += 1
        return [mock_embed(t, self.seed, self.dim) for t in texts]


class HttpEmbeddingClient:
    """Speaks ``{model, input: [str]} -> {data: [{index, embedding}]}``."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, *,
                 dim: int = EMBEDDING_DIM, timeout: float = 60.0, retries: int = 2, backoff: float = 0.5):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.dim = dim
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def dimension(self) -> int:
        return self.dim

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        reply = post_json(self.endpoint, {"model": self.model, "input": list(texts)}, headers=headers,
                          timeout=self.timeout, retries=self.retries, backoff=self.backoff)
        try:
            rows = sorted(reply["data"], key=lambda d: d["index"])
            vectors = [np.asarray(d["embedding"], dtype=np.float32) for d in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"{self.endpoint} reply is malformed: {exc}") from exc
        if [d["index"] for d in rows] != list(range(len(texts))):
            raise TransportError(f"{self.endpoint} returned {len(rows)} embeddings for {len(texts)} inputs")
        return vectors


def _check(vec: np.ndarray, want: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float32)
    if vec.ndim != 1 or vec.shape[0] != want:
        raise DimensionMismatch(int(vec.shape[-1]) if vec.ndim else 0, want)
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding has non-finite components")
    return vec


def embed_chunks(
    chunks: Sequence[Chunk],
    client: EmbeddingClient,
    batch_size: int = 64,
    *,
    max_in_flight: int = 4,
) -> list[tuple[str, np.ndarray]]:
    """One ``(chunk_id, vector)`` per non-empty chunk, in input order.

    Batches may run concurrently. If any batch fails, the first failure in
    batch order is re-raised with a ``partial`` attribute holding the
    results of every batch that succeeded.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    live = []
    for chunk in chunks:
        if chunk.embed_text.strip():
            live.append(chunk)
        else:
            log.warning("skipping empty chunk id=%s source=%s", chunk.id, chunk.source_name)
    batches = [live[i : i + batch_size] for i in range(0, len(live), batch_size)]
    want = client.dimension()

    def run(batch: list[Chunk]) -> list[tuple[str, np.ndarray]]:
        vectors = client.embed_batch([c.embed_text for c in batch])
        if len(vectors) != len(batch):
            raise TransportError(f"client returned {len(vectors)} vectors for {len(batch)} texts")
        return [(c.id, _check(v, want)) for c, v in zip(batch, vectors)]

    results: list[list[tuple[str, np.ndarray]] | Exception] = []
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        futures = [pool.submit(run, b) for b in batches]
        for fut in futures:
            try:
                results.append(fut.result())
            except Exception as exc:  # noqa: BLE001 - re-raised below with partial results
                results.append(exc)
    out: list[tuple[str, np.ndarray]] = []
    failure: Exception | None = None
    for r in results:
        if isinstance(r, Exception):
            failure = failure or r
        else:
            out.extend(r)
    if failure is not None:
        failure.partial = out  # type: ignore[attr-defined]
        raise failure
    return out
