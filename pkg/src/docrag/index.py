"""In-memory exact cosine index with namespaces and a checksummed file format."""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Union

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimensionMismatch,
    IndexFileError,
    TruncatedFile,
    UnsupportedVersion,
)
from .fileio import atomic_write_bytes

MetaValue = Union[str, int, float, bool]

MAGIC = b"VIDX1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IIQ")
_HEADER_SIZE = len(MAGIC) + _HEADER.size
_CHECKSUM_SIZE = 8


def file_checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_CHECKSUM_SIZE).digest()


@dataclass(frozen=True)
class IndexRecord:
    id: str
    vector: np.ndarray
    metadata: Mapping[str, MetaValue] = field(default_factory=dict)


@dataclass(frozen=True)
class ScoredMatch:
    id: str
    score: float
    metadata: Mapping[str, MetaValue]


class RWLock:
    """Many readers or one writer; a waiting writer blocks new readers."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    @contextmanager
    def read(self) -> Iterator[None]:
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self) -> Iterator[None]:
        with self._cond:
            self._writers_waiting += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class _Space:
    def __init__(self, dim: int):
        self.ids: list[str] = []
        self.rows: dict[str, int] = {}
        self.vectors = np.empty((0, dim), dtype=np.float32)  # unit-normalized
        self.norms = np.empty(0, dtype=np.float64)
        self.meta: list[dict[str, MetaValue]] = []


def _check_metadata(record_id: str, metadata: Mapping[str, Any]) -> dict[str, MetaValue]:
    out = {}
    for key, value in metadata.items():
        if not isinstance(key, str):
            raise ValueError(f"record {record_id!r}: metadata keys must be strings")
        if not isinstance(value, (str, int, float, bool)):
            raise ValueError(f"record {record_id!r}: metadata {key!r} must be a string, number or bool")
        if isinstance(value, float) and not math.isfinite(value):
            raise ValueError(f"record {record_id!r}: metadata {key!r} is not finite")
        out[key] = value
    return out


class VectorIndex:
    """Exact full-scan cosine search.

    Vectors are normalized once at upsert; queries are a float64 matrix
    product against the stored unit vectors. Results sort by descending
    score, ties by ascending id.
    """

    def __init__(self, dimension: int = 1536):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._spaces: dict[str, _Space] = {}
        self._lock = RWLock()

    def _vector(self, vec: Any, record_id: str = "") -> tuple[np.ndarray, float]:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise DimensionMismatch(int(arr.shape[-1]) if arr.ndim else 0, self.dimension)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"vector {record_id!r} has non-finite components")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError(f"vector {record_id!r} is zero; cosine is undefined")
        return arr / norm, norm

    def upsert(self, records: Iterable[IndexRecord], namespace: str = "") -> int:
        """Insert or wholly replace records by id; returns the number written."""
        prepared: dict[str, tuple[np.ndarray, float, dict[str, MetaValue]]] = {}
        for rec in records:
            if not rec.id:
                raise ValueError("record id must be non-empty")
            if len(rec.id.encode("utf-8")) > 0xFFFF:
                raise ValueError("record id longer than 65535 bytes")
            unit, norm = self._vector(rec.vector, rec.id)
            prepared[rec.id] = (unit, norm, _check_metadata(rec.id, rec.metadata))
        if not prepared:
            return 0
        with self._lock.write():
            space = self._spaces.setdefault(namespace, _Space(self.dimension))
            fresh = [i for i in prepared if i not in space.rows]
            start = len(space.ids)
            if fresh:
                space.vectors = np.vstack([space.vectors, np.zeros((len(fresh), self.dimension), np.float32)])
                space.norms = np.concatenate([space.norms, np.zeros(len(fresh))])
                for offset, rid in enumerate(fresh):
                    space.rows[rid] = start + offset
                    space.ids.append(rid)
                    space.meta.append({})
            for rid, (unit, norm, meta) in prepared.items():
                row = space.rows[rid]
                space.vectors[row] = unit
                space.norms[row] = norm
                space.meta[row] = meta
        return len(prepared)

    def delete(self, ids: Iterable[str], namespace: str = "") -> int:
        """Remove ids if present; returns how many were removed."""
        with self._lock.write():
            space = self._spaces.get(namespace)
            if space is None:
                return 0
            doomed = {space.rows[i] for i in set(ids) if i in space.rows}
            if not doomed:
                return 0
            keep = [r for r in range(len(space.ids)) if r not in doomed]
            space.vectors = space.vectors[keep]
            space.norms = space.norms[keep]
            space.ids = [space.ids[r] for r in keep]
            space.meta = [space.meta[r] for r in keep]
            space.rows = {rid: r for r, rid in enumerate(space.ids)}
            if not space.ids:
                del self._spaces[namespace]
            return len(doomed)

    def query(
        self,
        vector: Any,
        top_k: int = 5,
        namespace: str = "",
        filter: Mapping[str, MetaValue] | None = None,
    ) -> list[ScoredMatch]:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        q, _ = self._vector(vector)
        with self._lock.read():
            space = self._spaces.get(namespace)
            if space is None or not space.ids:
                return []
            rows = np.arange(len(space.ids))
            if filter:
                rows = np.array([r for r in rows if all(
                    k in space.meta[r] and _same(space.meta[r][k], v) for k, v in filter.items())], dtype=np.int64)
                if rows.size == 0:
                    return []
            scores = space.vectors[rows].astype(np.float64) @ q
            ids = np.array([space.ids[r] for r in rows])
            order = np.lexsort((ids, -scores))[:top_k]
            return [
                ScoredMatch(space.ids[rows[i]], float(np.clip(scores[i], -1.0, 1.0)), dict(space.meta[rows[i]]))
                for i in order
            ]

    def get(self, record_id: str, namespace: str = "") -> IndexRecord | None:
        """Stored record with its original (un-normalized) vector."""
        with self._lock.read():
            space = self._spaces.get(namespace)
            if space is None or record_id not in space.rows:
                return None
            row = space.rows[record_id]
            vec = space.vectors[row].astype(np.float64) * space.norms[row]
            return IndexRecord(record_id, vec, dict(space.meta[row]))

    def stats(self) -> dict[str, Any]:
        with self._lock.read():
            counts = {name: len(s.ids) for name, s in sorted(self._spaces.items())}
        return {"dimension": self.dimension, "namespaces": counts, "total": sum(counts.values())}

    def __len__(self) -> int:
        return self.stats()["total"]

    # persistence

    def to_bytes(self) -> bytes:
        """Canonical VIDX1 encoding: namespaces and ids in sorted order."""
        parts: list[bytes] = []
        count = 0
        with self._lock.read():
            for name in sorted(self._spaces):
                space = self._spaces[name]
                for rid in sorted(space.ids):
                    row = space.rows[rid]
                    envelope = {"namespace": name, "norm": float(space.norms[row]), "metadata": space.meta[row]}
                    id_bytes = rid.encode("utf-8")
                    meta_bytes = json.dumps(envelope, ensure_ascii=False, sort_keys=True,
                                            separators=(",", ":")).encode("utf-8")
                    parts += [struct.pack("<H", len(id_bytes)), id_bytes,
                              struct.pack("<I", len(meta_bytes)), meta_bytes,
                              space.vectors[row].astype("<f4").tobytes()]
                    count += 1
        body = MAGIC + _HEADER.pack(FORMAT_VERSION, self.dimension, count) + b"".join(parts)
        return body + file_checksum(body)

    def save(self, path: str | os.PathLike[str]) -> int:
        """Write a consistent snapshot atomically; returns bytes written."""
        data = self.to_bytes()
        atomic_write_bytes(Path(path), data)
        return len(data)

    @classmethod
    def from_bytes(cls, data: bytes) -> VectorIndex:
        if data[: len(MAGIC)] != MAGIC:
            if len(data) < len(MAGIC) and MAGIC.startswith(data):
                raise TruncatedFile(f"file is {len(data)} bytes, shorter than the magic")
            raise BadMagic("not a VIDX1 index file")
        if len(data) < _HEADER_SIZE + _CHECKSUM_SIZE:
            raise TruncatedFile(f"file is {len(data)} bytes, shorter than the header")
        version, dim, count = _HEADER.unpack_from(data, len(MAGIC))
        if version != FORMAT_VERSION:
            raise UnsupportedVersion(f"index format version {version}; this build reads {FORMAT_VERSION}")
        if dim == 0:
            raise IndexFileError("index dimension is zero")
        minimum = _HEADER_SIZE + count * (2 + 4 + 4 * dim) + _CHECKSUM_SIZE
        if len(data) < minimum:
            raise TruncatedFile(f"{count} records need at least {minimum} bytes, file has {len(data)}")
        body, trailer = data[:-_CHECKSUM_SIZE], data[-_CHECKSUM_SIZE:]
        if file_checksum(body) != trailer:
            raise ChecksumMismatch("index checksum does not match contents")
        return cls._parse(body, dim, count)

    @classmethod
    def _parse(cls, body: bytes, dim: int, count: int) -> VectorIndex:
        index = cls(dim)
        pos = _HEADER_SIZE
        grouped: dict[str, list[tuple[str, np.ndarray, float, dict[str, MetaValue]]]] = {}
        try:
            for _ in range(count):
                (n,) = struct.unpack_from("<H", body, pos)
                rid = body[pos + 2 : pos + 2 + n].decode("utf-8")
                pos += 2 + n
                (m,) = struct.unpack_from("<I", body, pos)
                envelope = json.loads(body[pos + 4 : pos + 4 + m].decode("utf-8"))
                pos += 4 + m
                vec = np.frombuffer(body, dtype="<f4", count=dim, offset=pos).astype(np.float32)
                pos += 4 * dim
                grouped.setdefault(envelope["namespace"], []).append(
                    (rid, vec, float(envelope["norm"]), envelope["metadata"]))
        except (struct.error, ValueError, KeyError, TypeError) as exc:
            raise IndexFileError(f"index body is inconsistent: {exc}") from exc
        if pos != len(body):
            raise IndexFileError(f"{len(body) - pos} unexpected bytes after the last record")
        # stored vectors are already unit-normalized; load them verbatim so
        # a round trip reproduces query scores bit for bit
        for name, rows in grouped.items():
            space = _Space(dim)
            space.ids = [r[0] for r in rows]
            space.rows = {rid: i for i, rid in enumerate(space.ids)}
            space.vectors = np.stack([r[1] for r in rows]) if rows else space.vectors
            space.norms = np.array([r[2] for r in rows], dtype=np.float64)
            space.meta = [r[3] for r in rows]
            index._spaces[name] = space
        return index

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> VectorIndex:
        return cls.from_bytes(Path(path).read_bytes())


def _same(a: MetaValue, b: MetaValue) -> bool:
    # True must not match 1
    return type(a) is type(b) and a == b if isinstance(a, bool) or isinstance(b, bool) else a == b
