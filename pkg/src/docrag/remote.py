"""Client for a hosted vector database speaking the Pinecone data-plane JSON protocol.

Only used when the index backend is configured as ``remote``.
"""

from __future__ import annotations

from typing import Any, Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch, TransportError
from .http import post_json
from .index import IndexRecord, MetaValue, ScoredMatch


class RemoteIndex:
    def __init__(self, host: str, api_key: str | None = None, *, dimension: int = 1536,
                 timeout: float = 30.0, retries: int = 2, backoff: float = 0.5, batch_size: int = 100):
        self.host = host.rstrip("/")
        self.api_key = api_key
        self.dimension = dimension
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.batch_size = batch_size

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        headers = {"Api-Key": self.api_key} if self.api_key else {}
        return post_json(self.host + path, payload, headers=headers, timeout=self.timeout,
                         retries=self.retries, backoff=self.backoff)

    def _values(self, vector: Any) -> list[float]:
        arr = np.asarray(vector, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise DimensionMismatch(int(arr.shape[-1]) if arr.ndim else 0, self.dimension)
        return [float(x) for x in arr]

    def upsert(self, records: Iterable[IndexRecord], namespace: str = "") -> int:
        batch: list[dict[str, Any]] = []
        written = 0
        for rec in records:
            batch.append({"id": rec.id, "values": self._values(rec.vector), "metadata": dict(rec.metadata)})
            if len(batch) == self.batch_size:
                written += self._upsert_batch(batch, namespace)
                batch = []
        if batch:
            written += self._upsert_batch(batch, namespace)
        return written

    def _upsert_batch(self, batch: list[dict[str, Any]], namespace: str) -> int:
        reply = self._post("/vectors/upsert", {"vectors": batch, "namespace": namespace})
        return int(reply.get("upsertedCount", len(batch)))

    def query(self, vector: Any, top_k: int = 5, namespace: str = "",
              filter: Mapping[str, MetaValue] | None = None) -> list[ScoredMatch]:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        payload: dict[str, Any] = {"vector": self._values(vector), "topK": top_k, "namespace": namespace,
                                   "includeMetadata": True, "includeValues": False}
        if filter:
            payload["filter"] = {k: {"$eq": v} for k, v in filter.items()}
        reply = self._post("/query", payload)
        try:
            return [ScoredMatch(m["id"], float(m["score"]), m.get("metadata") or {}) for m in reply["matches"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"{self.host}/query reply is malformed: {exc}") from exc

    def delete(self, ids: Iterable[str], namespace: str = "") -> int:
        ids = list(ids)
        if ids:
            self._post("/vectors/delete", {"ids": ids, "namespace": namespace})
        # the hosted API does not report how many ids existed
        return len(ids)

    def stats(self) -> dict[str, Any]:
        reply = self._post("/describe_index_stats", {})
        spaces = {name: int(info.get("vectorCount", 0)) for name, info in sorted(reply.get("namespaces", {}).items())}
        return {"dimension": int(reply.get("dimension", self.dimension)), "namespaces": spaces,
                "total": int(reply.get("totalVectorCount", sum(spaces.values())))}
