"""Query embedding, top-k lookup and context assembly."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

from .embedding import EmbeddingClient
from .index import MetaValue, ScoredMatch


class SearchableIndex(Protocol):
    def query(self, vector, top_k: int = 5, namespace: str = "",
              filter: dict[str, MetaValue] | None = None) -> list[ScoredMatch]: ...


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    matches: tuple[ScoredMatch, ...]
    context: str
    context_char_budget: int


def retrieve(query: str, k: int, client: EmbeddingClient, index: SearchableIndex,
             namespace: str = "") -> list[ScoredMatch]:
    if k < 1:
        raise ValueError("k must be >= 1")
    (vector,) = client.embed_batch([query])
    return index.query(vector, top_k=k, namespace=namespace)


def attribution(match: ScoredMatch) -> str:
    """Block header: ``[source § section]``, or ``[source]`` without a section."""
    source = str(match.metadata.get("source_name", ""))
    section = match.metadata.get("section_title")
    return f"[{source} § {section}]" if section else f"[{source}]"


def context_block(match: ScoredMatch) -> str:
    return f"{attribution(match)}\n{match.metadata.get('text', '')}\n"


def assemble_context(matches: Sequence[ScoredMatch], budget_chars: int, *, dedupe: bool = False) -> str:
    """Concatenate attributed blocks in match order until the next one would overflow.

    Blocks are never cut. With ``dedupe`` a block whose text was already
    included (by digest) is skipped.
    """
    out: list[str] = []
    used = 0
    seen: set[bytes] = set()
    for match in matches:
        if dedupe:
            digest = hashlib.sha256(str(match.metadata.get("text", "")).encode("utf-8")).digest()
            if digest in seen:
                continue
            seen.add(digest)
        block = context_block(match)
        if used + len(block) > budget_chars:
            break
        out.append(block)
        used += len(block)
    return "".join(out)


def answer_context(query: str, k: int, client: EmbeddingClient, index: SearchableIndex, *,
                   namespace: str = "", budget_chars: int = 8000, dedupe: bool = False) -> RetrievalResult:
    matches = retrieve(query, k, client, index, namespace)
    return RetrievalResult(query, tuple(matches), assemble_context(matches, budget_chars, dedupe=dedupe),
                           budget_chars)
