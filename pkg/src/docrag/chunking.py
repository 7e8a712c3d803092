"""Title-bounded chunking with character caps."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Literal, Sequence

from .errors import ConfigError
from .partition import DEFAULT_DROP, Element, ElementKind

ChunkKind = Literal["composite", "table", "image_description"]

# a sentence terminator that needs a following space to count as a boundary
_SPACED_TERMINATORS = frozenset(".!?")
_BARE_TERMINATORS = frozenset("。！？")


@dataclass(frozen=True)
class ChunkingConfig:
    """``multipage_sections`` is accepted for compatibility; docx input has no
    page boundaries, so it has no effect."""

    multipage_sections: bool = True
    combine_text_under_n_chars: int = 0
    new_after_n_chars: int | None = None
    max_characters: int = 4096

    def __post_init__(self) -> None:
        if self.max_characters <= 0:
            raise ConfigError(f"max_characters must be > 0, got {self.max_characters}")
        if self.new_after_n_chars is None:
            object.__setattr__(self, "new_after_n_chars", self.max_characters)
        if not 0 <= self.combine_text_under_n_chars <= self.new_after_n_chars <= self.max_characters:
            raise ConfigError(
                "need 0 <= combine_text_under_n_chars <= new_after_n_chars <= max_characters, got "
                f"{self.combine_text_under_n_chars}, {self.new_after_n_chars}, {self.max_characters}"
            )

    @property
    def soft_limit(self) -> int:
        assert self.new_after_n_chars is not None
        return self.new_after_n_chars


@dataclass(frozen=True)
class Chunk:
    id: str
    text: str
    kind: ChunkKind
    element_seqs: tuple[int, ...]
    section_title: str | None
    source_name: str = ""
    text_as_html: str | None = None
    caption: str | None = None
    # true when the chunk carries on the section of the chunk before it
    continuation: bool = False

    @property
    def char_count(self) -> int:
        return len(self.text)

    @property
    def embed_text(self) -> str:
        """Text handed to the embedder: table chunks carry their HTML block too."""
        return f"{self.text}\n{self.text_as_html}" if self.text_as_html else self.text


def chunk_id(source_name: str, first_seq: int, offset: int, text: str) -> str:
    """Stable id; ``offset`` is where the chunk starts inside its first element."""
    key = f"{source_name}\x1f{first_seq}\x1f{offset}\x1f{text}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:32]


def split_oversize(text: str, max_chars: int) -> list[str]:
    """Cut ``text`` into pieces of at most ``max_chars`` that concatenate back to it.

    Each cut goes after the last sentence terminator in the window, else
    before the last whitespace, else exactly at ``max_chars``.
    """
    if max_chars <= 0:
        raise ValueError("max_chars must be > 0")
    pieces = []
    start = 0
    while len(text) - start > max_chars:
        pieces.append(text[start : start + (cut := _cut_point(text, start, max_chars))])
        start += cut
    pieces.append(text[start:])
    return pieces


def _cut_point(text: str, start: int, max_chars: int) -> int:
    end = start + max_chars
    for k in range(end - 1, start - 1, -1):
        c = text[k]
        if c in _BARE_TERMINATORS or (c in _SPACED_TERMINATORS and k + 1 < len(text) and text[k + 1].isspace()):
            return k + 1 - start
    # cutting at index ``end`` is allowed when the whitespace sits right past the window
    for k in range(end, start, -1):
        if text[k].isspace():
            return k - start
    return max_chars


class _Builder:
    def __init__(self, cfg: ChunkingConfig, source_name: str):
        self.cfg = cfg
        self.source = source_name
        self.chunks: list[Chunk] = []
        self.parts: list[str] = []
        self.seqs: list[int] = []
        self.offset = 0
        self.length = 0
        self.section: str | None = None
        self.continuation = False

    def flush(self) -> None:
        if not self.parts:
            return
        text = "\n".join(self.parts)
        self.chunks.append(Chunk(
            id=chunk_id(self.source, self.seqs[0], self.offset, text),
            text=text, kind="composite", element_seqs=tuple(self.seqs),
            section_title=self.section, source_name=self.source, continuation=self.continuation,
        ))
        self.parts, self.seqs, self.length = [], [], 0
        # whatever follows in this section is a continuation until a Title resets it
        self.continuation = True

    def add(self, seq: int, text: str) -> None:
        offset = 0
        for piece in split_oversize(text, self.cfg.max_characters):
            # pieces of one element never share a chunk, so no joiner lands inside the element
            if self.parts and (offset > 0 or self.length + 1 + len(piece) > self.cfg.soft_limit):
                self.flush()
            if not self.parts:
                self.offset = offset
                self.length = len(piece)
            else:
                self.length += 1 + len(piece)
            self.parts.append(piece)
            if not self.seqs or self.seqs[-1] != seq:
                self.seqs.append(seq)
            offset += len(piece)

    def start_section(self, title: str) -> None:
        self.flush()
        self.section = title
        self.continuation = False

    def isolated(self, element: Element, kind: ChunkKind) -> None:
        self.flush()
        caption = element.metadata.caption if kind == "table" else None
        text = "\n".join(t for t in (caption, element.text) if t)
        html = element.metadata.text_as_html if kind == "table" else None
        offset = 0
        for i, piece in enumerate(split_oversize(text, self.cfg.max_characters)):
            self.chunks.append(Chunk(
                id=chunk_id(self.source, element.seq, offset, piece),
                text=piece, kind=kind, element_seqs=(element.seq,), section_title=self.section,
                source_name=self.source, text_as_html=html if i == 0 else None,
                caption=caption if i == 0 else None, continuation=i > 0,
            ))
            offset += len(piece)
        self.continuation = True


def _isolated_kind(element: Element) -> ChunkKind | None:
    if element.kind == ElementKind.TABLE:
        return "table"
    if element.kind == ElementKind.IMAGE or element.is_image_derived:
        return "image_description"
    return None


def chunk_by_title(elements: Sequence[Element], cfg: ChunkingConfig = ChunkingConfig()) -> list[Chunk]:
    """Group elements into chunks.

    A Title opens a new section and is the first line of its chunk. Tables
    and image-derived elements become chunks of their own. Text accumulates
    until the next element would push the chunk past ``new_after_n_chars``.
    Member texts are joined with a newline; elements longer than
    ``max_characters`` are split with :func:`split_oversize`.
    """
    source = elements[0].metadata.source_name if elements else ""
    b = _Builder(cfg, source)
    for element in elements:
        if not element.text and element.kind != ElementKind.TABLE:
            continue
        if element.kind in DEFAULT_DROP:
            continue
        kind = _isolated_kind(element)
        if kind is not None:
            # only tables prefix their caption; an image needs text of its own
            if element.text or (kind == "table" and element.metadata.caption):
                b.isolated(element, kind)
            continue
        if element.kind == ElementKind.TITLE:
            merge = (
                b.parts
                and b.length < cfg.combine_text_under_n_chars
                and b.length + 1 + len(element.text) <= cfg.soft_limit
            )
            if not merge:
                b.start_section(element.text)
        b.add(element.seq, element.text)
    b.flush()
    return b.chunks


def reassemble(chunks: Sequence[Chunk]) -> str:
    """Undo chunking: rejoin with the chunker's joiners and drop table caption prefixes.

    Chunks holding consecutive pieces of one split element are joined
    directly; every other boundary gets the newline used between elements.
    """
    segments: list[tuple[str | None, str]] = []
    prev_last: int | None = None
    for chunk in chunks:
        if segments and prev_last == chunk.element_seqs[0]:
            caption, text = segments[-1]
            segments[-1] = (caption, text + chunk.text)
        else:
            segments.append((chunk.caption, chunk.text))
        prev_last = chunk.element_seqs[-1]
    texts = []
    for caption, text in segments:
        if caption:
            text = text[len(caption) + 1 :]
        if text:
            texts.append(text)
    return "\n".join(texts)
