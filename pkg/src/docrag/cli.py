"""``docrag`` command-line entry point.

Exit codes: 0 success, 1 input error, 2 configuration error, 3 remote
service failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .chunking import chunk_by_title
from .config import PipelineConfig, default_config_text, load_config
from .embedding import embed_chunks
from .errors import ConfigError, DimensionMismatch, DocragError, InputError, ServiceError
from .index import VectorIndex
from .pipeline import (
    embedding_client,
    elements_from_tree,
    open_index,
    process_documents,
    read_document,
    records_for,
)
from .retrieval import assemble_context, retrieve
from .serialize import (
    read_chunks,
    read_elements,
    read_manifest,
    write_chunks,
    write_elements,
    write_manifest,
)

log = logging.getLogger("docrag")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_REMOTE = 0, 1, 2, 3


class _ConfigArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _set(overrides: dict[str, dict[str, Any]], section: str, key: str, value: Any) -> None:
    if value is not None:
        overrides.setdefault(section, {})[key] = value


def _overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    """Translate flags into config-file keys so both paths share one validator."""
    o: dict[str, dict[str, Any]] = {}
    get = lambda name: getattr(args, name, None)  # noqa: E731
    for key in ("max_characters", "new_after_n_chars", "combine_text_under_n_chars", "multipage_sections"):
        _set(o, "chunking", key, get(key))
    if get("mock"):
        _set(o, "vision", "mock", True)
        _set(o, "embedding", "mock", True)
    if get("no_vision"):
        _set(o, "vision", "enabled", False)
    _set(o, "embedding", "mock_seed", get("mock_seed"))
    _set(o, "embedding", "batch_size", get("batch_size"))
    _set(o, "embedding", "model", get("model"))
    _set(o, "embedding", "endpoint", get("endpoint"))
    _set(o, "index", "path", get("index"))
    _set(o, "index", "namespace", get("namespace"))
    _set(o, "retrieval", "top_k", get("top_k"))
    _set(o, "retrieval", "context_budget", get("budget"))
    if get("dedupe"):
        _set(o, "retrieval", "dedupe", True)
    _set(o, "pipeline", "workers", get("workers"))
    _set(o, "pipeline", "out_dir", get("out_dir"))
    return o


def _config(args: argparse.Namespace) -> PipelineConfig:
    return load_config(args.config, _overrides(args))


# commands


def cmd_parse(args: argparse.Namespace) -> int:
    cfg = _config(args)
    tree = read_document(Path(args.input))
    elements = elements_from_tree(tree, cfg)
    write_elements(Path(args.out), elements)
    log.info("wrote elements path=%s count=%d", args.out, len(elements))
    return EXIT_OK


def cmd_chunk(args: argparse.Namespace) -> int:
    cfg = _config(args)
    elements = read_elements(Path(args.input))
    # chunking is per source document
    groups: dict[str, list] = {}
    for element in elements:
        groups.setdefault(element.metadata.source_name, []).append(element)
    chunks = [c for group in groups.values() for c in chunk_by_title(group, cfg.chunking)]
    write_chunks(Path(args.out), chunks)
    log.info("wrote chunks path=%s count=%d", args.out, len(chunks))
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    cfg = _config(args)
    chunks = read_chunks(Path(args.input))
    client = embedding_client(cfg)
    try:
        vectors = embed_chunks(chunks, client, cfg.embedding.batch_size, max_in_flight=cfg.embedding.max_in_flight)
    except DimensionMismatch as exc:
        raise ServiceError(f"embedding service broke the dimension contract: {exc}") from exc
    model = "mock" if cfg.embedding.mock else cfg.embedding.model
    write_manifest(Path(args.out), chunks, vectors, dimension=cfg.embedding.dimension, model=model)
    log.info("wrote embeddings path=%s count=%d", args.out, len(vectors))
    return EXIT_OK


def _save(index: Any, cfg: PipelineConfig) -> None:
    if isinstance(index, VectorIndex):
        index.save(cfg.index.path)


def cmd_index_upsert(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dim, records = read_manifest(Path(args.manifest))
    if dim != cfg.embedding.dimension:
        raise InputError(f"manifest dimension {dim} does not match configured {cfg.embedding.dimension}")
    index = open_index(cfg, create=True)
    written = index.upsert(records, cfg.index.namespace)
    _save(index, cfg)
    print(json.dumps({"upserted": written}))
    return EXIT_OK


def cmd_index_query(args: argparse.Namespace) -> int:
    cfg = _config(args)
    index = open_index(cfg)
    client = embedding_client(cfg)
    matches = retrieve(args.text, cfg.retrieval.top_k, client, index, cfg.index.namespace)
    out = {
        "query": args.text,
        "matches": [
            {"id": m.id, "score": m.score, "source_name": m.metadata.get("source_name"),
             "section_title": m.metadata.get("section_title")}
            for m in matches
        ],
        "context": assemble_context(matches, cfg.retrieval.context_budget, dedupe=cfg.retrieval.dedupe),
    }
    print(json.dumps(out, ensure_ascii=False, indent=1))
    return EXIT_OK


def cmd_index_stats(args: argparse.Namespace) -> int:
    cfg = _config(args)
    print(json.dumps(open_index(cfg).stats(), ensure_ascii=False, sort_keys=True))
    return EXIT_OK


def cmd_index_delete(args: argparse.Namespace) -> int:
    cfg = _config(args)
    index = open_index(cfg)
    removed = index.delete(args.ids, cfg.index.namespace)
    _save(index, cfg)
    print(json.dumps({"deleted": removed}))
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out_dir = Path(cfg.out_dir)
    results = process_documents([Path(p) for p in args.inputs], cfg)
    client = embedding_client(cfg)
    index = open_index(cfg, create=True)
    all_chunks = []
    for result in results:
        write_elements(out_dir / f"{result.source_name}.elements.jsonl", result.elements)
        all_chunks.extend(result.chunks)
    write_chunks(out_dir / "chunks.jsonl", all_chunks)
    try:
        records = records_for(all_chunks, client, cfg)
    except DimensionMismatch as exc:
        raise ServiceError(f"embedding service broke the dimension contract: {exc}") from exc
    written = index.upsert(records, cfg.index.namespace)
    _save(index, cfg)
    log.info("pipeline done documents=%d chunks=%d upserted=%d", len(results), len(all_chunks), written)
    print(json.dumps({"documents": len(results), "chunks": len(all_chunks), "upserted": written}))
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    if args.check:
        _config(args)
        print("ok")
    else:
        sys.stdout.write(default_config_text())
    return EXIT_OK


# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="TOML configuration file")


def _add_chunking(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-characters", type=int)
    p.add_argument("--new-after-n-chars", type=int)
    p.add_argument("--combine-text-under-n-chars", type=int)
    p.add_argument("--multipage-sections", action=argparse.BooleanOptionalAction, default=None)


def _add_embedding(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mock", action="store_true", help="offline deterministic clients")
    p.add_argument("--mock-seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--model")
    p.add_argument("--endpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = _ConfigArgumentParser(prog="docrag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ConfigArgumentParser)

    p = sub.add_parser("parse", help="document -> elements JSONL")
    _add_common(p)
    p.add_argument("input", help=".docx or PlainDocument .json")
    p.add_argument("--out", required=True)
    p.add_argument("--mock", action="store_true", help="use the offline vision client")
    p.add_argument("--no-vision", action="store_true", help="keep images as Image elements")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("chunk", help="elements JSONL -> chunks JSONL")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_chunking(p)
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("embed", help="chunks JSONL -> embedding manifest")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--out", required=True, help="manifest path; vectors go to a sibling .f32 file")
    _add_embedding(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index", help="index operations")
    isub = p.add_subparsers(dest="index_command", required=True, parser_class=_ConfigArgumentParser)
    for name, func, help_ in (
        ("upsert", cmd_index_upsert, "add records from an embedding manifest"),
        ("query", cmd_index_query, "top-k search with context assembly"),
        ("stats", cmd_index_stats, "namespace counts"),
        ("delete", cmd_index_delete, "remove ids"),
    ):
        q = isub.add_parser(name, help=help_)
        _add_common(q)
        q.add_argument("--index", help="index file path")
        q.add_argument("--namespace")
        q.set_defaults(func=func)
        if name == "upsert":
            q.add_argument("manifest")
        elif name == "query":
            q.add_argument("--text", required=True)
            q.add_argument("--top-k", type=int)
            q.add_argument("--budget", type=int, help="context size limit in characters")
            q.add_argument("--dedupe", action="store_true")
            _add_embedding(q)
        elif name == "delete":
            q.add_argument("ids", nargs="+")

    p = sub.add_parser("pipeline", help="parse, chunk, embed and index in one run")
    _add_common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--index", help="index file path")
    p.add_argument("--namespace")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, help="document worker processes (0 = CPU count)")
    p.add_argument("--no-vision", action="store_true")
    _add_chunking(p)
    _add_embedding(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("config", help="print the default configuration, or --check a file")
    _add_common(p)
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_config)
    return parser


def _setup_logging(verbose: int, quiet: bool) -> None:
    level = logging.ERROR if quiet else (logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("level=%(levelname)s logger=%(name)s %(message)s"))
    root = logging.getLogger("docrag")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ServiceError as exc:
        log.error("remote service failure: %s", exc)
        return EXIT_REMOTE
    except (InputError, DimensionMismatch) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except DocragError as exc:
        log.error("error: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
