"""Elements/Chunks JSONL and the embedding manifest."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .chunking import Chunk
from .errors import InputError, SchemaViolation
from .fileio import atomic_write_bytes, atomic_write_text
from .index import IndexRecord, MetaValue
from .partition import Element, ElementKind, ElementMetadata

EL_VERSION = 1
CK_VERSION = 1
VM_VERSION = 1


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def element_to_json(element: Element) -> dict[str, Any]:
    m = element.metadata
    return {
        "el_version": EL_VERSION,
        "kind": element.kind.value,
        "text": element.text,
        "seq": element.seq,
        "metadata": {
            "source_name": m.source_name,
            "section_path": list(m.section_path),
            "languages": sorted(m.languages),
            "caption": m.caption,
            "text_as_html": m.text_as_html,
            "image_ref": m.image_ref,
            "derived_from": m.derived_from,
            "error": m.error,
        },
    }


def element_from_json(obj: Any, where: str = "") -> Element:
    try:
        if obj.get("el_version") != EL_VERSION:
            raise SchemaViolation(f"{where}el_version", f"expected {EL_VERSION}, got {obj.get('el_version')!r}")
        meta = obj.get("metadata") or {}
        return Element(
            kind=ElementKind(obj["kind"]),
            text=_str(obj["text"], f"{where}text"),
            seq=_int(obj["seq"], f"{where}seq"),
            metadata=ElementMetadata(
                source_name=meta.get("source_name", ""),
                section_path=tuple(meta.get("section_path", ())),
                languages=frozenset(meta.get("languages", ())),
                caption=meta.get("caption"),
                text_as_html=meta.get("text_as_html"),
                image_ref=meta.get("image_ref"),
                derived_from=meta.get("derived_from"),
                error=meta.get("error"),
            ),
        )
    except KeyError as exc:
        raise SchemaViolation(f"{where}{exc.args[0]}", "missing field") from exc
    except (AttributeError, TypeError, ValueError) as exc:
        raise SchemaViolation(where.rstrip("/") or "<line>", str(exc)) from exc


def chunk_to_json(chunk: Chunk) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "ck_version": CK_VERSION,
        "id": chunk.id,
        "text": chunk.text,
        "kind": chunk.kind,
        "section_title": chunk.section_title,
        "char_count": chunk.char_count,
        "element_seqs": list(chunk.element_seqs),
        "source_name": chunk.source_name,
        "continuation": chunk.continuation,
    }
    if chunk.text_as_html is not None:
        obj["text_as_html"] = chunk.text_as_html
    if chunk.caption is not None:
        obj["caption"] = chunk.caption
    return obj


def chunk_from_json(obj: Any, where: str = "") -> Chunk:
    try:
        if obj.get("ck_version") != CK_VERSION:
            raise SchemaViolation(f"{where}ck_version", f"expected {CK_VERSION}, got {obj.get('ck_version')!r}")
        chunk = Chunk(
            id=_str(obj["id"], f"{where}id"),
            text=_str(obj["text"], f"{where}text"),
            kind=obj["kind"],
            element_seqs=tuple(_int(s, f"{where}element_seqs") for s in obj["element_seqs"]),
            section_title=obj.get("section_title"),
            source_name=obj.get("source_name", ""),
            text_as_html=obj.get("text_as_html"),
            caption=obj.get("caption"),
            continuation=bool(obj.get("continuation", False)),
        )
    except KeyError as exc:
        raise SchemaViolation(f"{where}{exc.args[0]}", "missing field") from exc
    except (AttributeError, TypeError) as exc:
        raise SchemaViolation(where.rstrip("/") or "<line>", str(exc)) from exc
    if chunk.kind not in ("composite", "table", "image_description"):
        raise SchemaViolation(f"{where}kind", f"unknown chunk kind {chunk.kind!r}")
    if obj.get("char_count", chunk.char_count) != chunk.char_count:
        raise SchemaViolation(f"{where}char_count", "does not match the text length")
    return chunk


def _str(value: Any, field: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(field, "expected a string")
    return value


def _int(value: Any, field: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaViolation(field, "expected an integer")
    return value


def dump_jsonl(objects: Iterable[dict[str, Any]]) -> str:
    return "".join(_dumps(o) + "\n" for o in objects)


def iter_jsonl(path: Path) -> Iterator[tuple[int, Any]]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{path.name}:{lineno}", f"invalid JSON: {exc.msg}") from exc


def write_elements(path: Path, elements: Sequence[Element]) -> None:
    atomic_write_text(path, dump_jsonl(element_to_json(e) for e in elements))


def read_elements(path: Path) -> list[Element]:
    return [element_from_json(obj, f"{path.name}:{n}/") for n, obj in iter_jsonl(path)]


def write_chunks(path: Path, chunks: Sequence[Chunk]) -> None:
    atomic_write_text(path, dump_jsonl(chunk_to_json(c) for c in chunks))


def read_chunks(path: Path) -> list[Chunk]:
    return [chunk_from_json(obj, f"{path.name}:{n}/") for n, obj in iter_jsonl(path)]


def index_metadata(chunk: Chunk) -> dict[str, MetaValue]:
    """Flat metadata stored with each vector; ``text`` is exactly what was embedded."""
    meta: dict[str, MetaValue] = {"text": chunk.embed_text, "source_name": chunk.source_name, "kind": chunk.kind}
    if chunk.section_title is not None:
        meta["section_title"] = chunk.section_title
    return meta


def write_manifest(path: Path, chunks: Sequence[Chunk], vectors: Sequence[tuple[str, np.ndarray]],
                   *, dimension: int, model: str) -> None:
    """Manifest JSON plus a sibling ``.f32`` file of little-endian row vectors."""
    by_id = {c.id: c for c in chunks}
    matrix = (np.stack([v for _, v in vectors]) if vectors else np.empty((0, dimension))).astype("<f4")
    blob = matrix.tobytes()
    vec_path = path.with_suffix(".f32")
    manifest = {
        "vm_version": VM_VERSION,
        "model": model,
        "dimension": dimension,
        "count": len(vectors),
        "vectors_file": vec_path.name,
        "vectors_sha256": hashlib.sha256(blob).hexdigest(),
        "records": [{"id": cid, "metadata": index_metadata(by_id[cid])} for cid, _ in vectors],
    }
    atomic_write_bytes(vec_path, blob)
    atomic_write_text(path, json.dumps(manifest, ensure_ascii=False, indent=1) + "\n")


def read_manifest(path: Path) -> tuple[int, list[IndexRecord]]:
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(path.name, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(manifest, dict) or manifest.get("vm_version") != VM_VERSION:
        raise SchemaViolation("vm_version", f"expected {VM_VERSION}")
    try:
        dim = _int(manifest["dimension"], "dimension")
        count = _int(manifest["count"], "count")
        records = manifest["records"]
        blob = (path.parent / _str(manifest["vectors_file"], "vectors_file")).read_bytes()
    except KeyError as exc:
        raise SchemaViolation(str(exc.args[0]), "missing field") from exc
    except OSError as exc:
        raise InputError(f"cannot read vectors for {path}: {exc}") from exc
    if hashlib.sha256(blob).hexdigest() != manifest.get("vectors_sha256"):
        raise SchemaViolation("vectors_sha256", "vector file does not match the manifest digest")
    if len(blob) != count * dim * 4 or len(records) != count:
        raise SchemaViolation("count", "record count does not match the vector file")
    matrix = np.frombuffer(blob, dtype="<f4").reshape(count, dim) if count else np.empty((0, dim), np.float32)
    return dim, [IndexRecord(r["id"], matrix[i], r["metadata"]) for i, r in enumerate(records)]
