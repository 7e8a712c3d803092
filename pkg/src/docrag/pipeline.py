"""Stage wiring shared by the CLI: read, partition, clean, enrich, chunk, embed, index."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chunking import Chunk, chunk_by_title
from .clean import clean_elements
from .config import PipelineConfig
from .docx_reader import open_docx
from .document import DocumentTree
from .embedding import EmbeddingClient, HttpEmbeddingClient, MockEmbeddingClient, embed_chunks
from .enrich import (
    HttpVisionClient,
    MockVisionClient,
    VisionClient,
    associate_captions,
    attach_table_html,
    describe_images,
)
from .errors import ConfigError, InputError
from .index import IndexRecord, VectorIndex
from .partition import Element, ElementKind, filter_elements, partition
from .plain import open_plain_document
from .remote import RemoteIndex
from .serialize import index_metadata

log = logging.getLogger(__name__)


def read_document(path: Path) -> DocumentTree:
    """Open a ``.docx`` package or a PlainDocument ``.json`` file."""
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        return open_plain_document(data, source_name=path.name)
    return open_docx(data, source_name=path.name)


def vision_client(cfg: PipelineConfig) -> VisionClient | None:
    v = cfg.vision
    if not v.enabled:
        return None
    if v.mock:
        return MockVisionClient()
    if not v.endpoint:
        raise ConfigError("vision.endpoint is required for documents with images "
                          "(or set vision.mock, or vision.enabled = false)")
    return HttpVisionClient(v.endpoint, v.model, v.api_key(), timeout=v.timeout, retries=v.retries,
                            backoff=v.backoff)


def embedding_client(cfg: PipelineConfig) -> EmbeddingClient:
    e = cfg.embedding
    if e.mock:
        return MockEmbeddingClient(seed=e.mock_seed, dim=e.dimension)
    if not e.endpoint:
        raise ConfigError("embedding.endpoint is required unless embedding.mock is set")
    return HttpEmbeddingClient(e.endpoint, e.model, e.api_key(), dim=e.dimension, timeout=e.timeout,
                               retries=e.retries, backoff=e.backoff)


def elements_from_tree(tree: DocumentTree, cfg: PipelineConfig) -> list[Element]:
    """Partition, filter, clean and enrich one document."""
    elements = partition(tree, cfg.partition)
    elements = filter_elements(elements, cfg.drop_kinds)
    elements = clean_elements(elements, cfg.clean)
    elements = associate_captions(elements, cfg.captions)
    elements = attach_table_html(elements)
    if any(e.kind == ElementKind.IMAGE for e in elements):
        client = vision_client(cfg)
        if client is not None:
            elements = describe_images(elements, client, tree.media, max_in_flight=cfg.vision.max_in_flight)
    failed = [e.seq for e in elements if e.metadata.error]
    if failed:
        log.warning("images left undescribed source=%s seqs=%s", tree.source_name, failed)
    return elements


@dataclass(frozen=True)
class DocumentResult:
    source_name: str
    elements: list[Element]
    chunks: list[Chunk]


def process_document(path: Path, cfg: PipelineConfig) -> DocumentResult:
    tree = read_document(path)
    elements = elements_from_tree(tree, cfg)
    chunks = chunk_by_title(elements, cfg.chunking)
    log.info("processed source=%s elements=%d chunks=%d", tree.source_name, len(elements), len(chunks))
    return DocumentResult(tree.source_name, elements, chunks)


def _worker(args: tuple[str, PipelineConfig]) -> DocumentResult:
    path, cfg = args
    return process_document(Path(path), cfg)


def process_documents(paths: Sequence[Path], cfg: PipelineConfig) -> list[DocumentResult]:
    """Per-document work, fanned out over a process pool; results keep input order."""
    names = [p.name for p in paths]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise InputError(f"input file names must be unique, repeated: {', '.join(dupes)}")
    workers = cfg.workers or os.cpu_count() or 1
    workers = min(workers, len(paths))
    if workers <= 1:
        return [process_document(p, cfg) for p in paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_worker, [(str(p), cfg) for p in paths]))


def open_index(cfg: PipelineConfig, path: str | os.PathLike[str] | None = None, *, create: bool = False):
    """The configured index backend; a local file that does not exist yet opens empty when ``create``."""
    if cfg.index.backend == "remote":
        if not cfg.index.remote_host:
            raise ConfigError("index.remote_host is required for the remote backend")
        key = os.environ.get(cfg.index.key_env) if cfg.index.key_env else None
        return RemoteIndex(cfg.index.remote_host, key, dimension=cfg.embedding.dimension)
    target = Path(path or cfg.index.path)
    if target.exists():
        index = VectorIndex.load(target)
        if index.dimension != cfg.embedding.dimension:
            raise ConfigError(f"index {target} has dimension {index.dimension}, "
                              f"config says {cfg.embedding.dimension}")
        return index
    if not create:
        raise InputError(f"index file {target} does not exist")
    return VectorIndex(cfg.embedding.dimension)


def records_for(chunks: Sequence[Chunk], client: EmbeddingClient, cfg: PipelineConfig) -> list[IndexRecord]:
    vectors = embed_chunks(chunks, client, cfg.embedding.batch_size, max_in_flight=cfg.embedding.max_in_flight)
    by_id = {c.id: c for c in chunks}
    return [IndexRecord(cid, vec, index_metadata(by_id[cid])) for cid, vec in vectors]
