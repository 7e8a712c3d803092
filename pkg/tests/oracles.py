"""Independent reference implementations and generators shared by several test modules."""

from __future__ import annotations

import random
import re
from html.parser import HTMLParser

import numpy as np
from hypothesis import strategies as st

from docrag.chunking import ChunkingConfig
from docrag.clean import DEFAULT_BULLETS, clean
from docrag.document import Cell, TableBlock
from docrag.partition import Element, ElementKind, ElementMetadata


class _TableParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.rows: list[list[tuple[str, int, int]]] = []
        self.sections: list[str] = []
        self.caption_lines: list[str] = []
        self._cell: list[str] | None = None
        self._attrs: dict[str, str] = {}
        self._in_table = False
        self._pre_text: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "table":
            self._in_table = True
        elif tag in ("thead", "tbody"):
            self.sections.append(tag)
        elif tag == "tr":
            self.rows.append([])
        elif tag in ("td", "th"):
            self._cell = []
            self._attrs = dict(attrs)

    def handle_endtag(self, tag):
        if tag in ("td", "th") and self._cell is not None:
            self.rows[-1].append(
                ("".join(self._cell), int(self._attrs.get("colspan", 1)), int(self._attrs.get("rowspan", 1)))
            )
            self._cell = None

    def handle_data(self, data):
        if self._cell is not None:
            self._cell.append(data)
        elif not self._in_table:
            self._pre_text.append(data)


def parse_table_html(html: str) -> tuple[list[list[tuple[str, int, int]]], str | None]:
    """Cells as (text, colspan, rowspan) per row, and the caption line if wrapped."""
    parser = _TableParser()
    parser.feed(html)
    parser.close()
    caption = "".join(parser._pre_text).strip("\n") or None
    return parser.rows, caption


def cell_matrix(table: TableBlock) -> list[list[tuple[str, int, int]]]:
    return [[(c.text, c.col_span, c.row_span) for c in row] for row in table.rows]


def expand(rows: list[list[tuple[str, int, int]]]) -> list[list[str | None]]:
    """Full grid where each position holds its anchor cell's text; None for holes."""
    width = 0
    grid: dict[tuple[int, int], str] = {}
    for r, row in enumerate(rows):
        c = 0
        for text, cs, rs in row:
            while (r, c) in grid:
                c += 1
            for dr in range(rs):
                for dc in range(cs):
                    grid[(r + dr, c + dc)] = text
            c += cs
            width = max(width, c)
    height = max([r + 1 for r, _ in grid] + [len(rows)]) if grid else len(rows)
    return [[grid.get((r, c)) for c in range(width)] for r in range(height)]


def flat_text(rows: list[list[tuple[str, int, int]]]) -> str:
    lines = [" ".join(t for t, _, _ in row if t) for row in rows]
    return "\n".join(line for line in lines if line)


CELL_TEXT = st.text(alphabet=st.sampled_from("ab1.5 <>&表±"), max_size=6).map(str.strip)


@st.composite
def rectangular_tables(draw, max_width: int = 4, max_height: int = 5) -> TableBlock:
    """Rectangular grids with random row and column spans."""
    width = draw(st.integers(1, max_width))
    height = draw(st.integers(0, max_height))
    taken: set[tuple[int, int]] = set()
    rows = []
    for r in range(height):
        row = []
        c = 0
        while c < width:
            if (r, c) in taken:
                c += 1
                continue
            run = 0
            while c + run < width and (r, c + run) not in taken:
                run += 1
            cs = draw(st.integers(1, run))
            rs = draw(st.integers(1, height - r))
            # shrink the row span until the block below is free
            while rs > 1 and any((r + dr, c + dc) in taken for dr in range(1, rs) for dc in range(cs)):
                rs -= 1
            for dr in range(rs):
                for dc in range(cs):
                    taken.add((r + dr, c + dc))
            row.append(Cell(draw(CELL_TEXT), col_span=cs, row_span=rs, is_header=False, bold=draw(st.booleans())))
            c += cs
        rows.append(tuple(row))
    return TableBlock(rows=tuple(rows))


# chunking

_TERMINATOR = re.compile(r"[。！？]|[.!?](?=\s)")


def split_oracle(text: str, max_chars: int) -> list[str]:
    """Reference split: rightmost terminator, then rightmost whitespace, then a hard cut."""
    pieces = []
    while len(text) > max_chars:
        ends = [m.end() for m in _TERMINATOR.finditer(text[: max_chars + 1]) if m.end() <= max_chars]
        spaces = [i for i, ch in enumerate(text[: max_chars + 1]) if ch.isspace() and i > 0]
        cut = ends[-1] if ends else spaces[-1] if spaces else max_chars
        pieces.append(text[:cut])
        text = text[cut:]
    return pieces + [text]


_WORDS = ["sludge", "aeration", "flow", "COD", "污泥", "曝气池", "运行", "a", "x" * 40]
_ENDS = ["", "", ". ", "。", "! ", "？", "\n"]


def random_text(rng: random.Random, max_words: int) -> str:
    parts = []
    for _ in range(rng.randint(1, max_words)):
        parts.append(rng.choice(_WORDS))
        parts.append(rng.choice([" ", " ", "", "  "]) + rng.choice(_ENDS))
    return "".join(parts).strip()


def random_elements(rng: random.Random, source: str = "gen.docx") -> list[Element]:
    kinds = [ElementKind.TITLE, ElementKind.NARRATIVE_TEXT, ElementKind.NARRATIVE_TEXT, ElementKind.NARRATIVE_TEXT,
             ElementKind.TABLE, ElementKind.UNCATEGORIZED, ElementKind.HEADER, "image", ElementKind.IMAGE]
    out = []
    for seq in range(rng.randint(0, 40)):
        kind = rng.choice(kinds)
        meta = {"source_name": source}
        text = random_text(rng, rng.choice([3, 10, 80]))
        if kind == "image":
            kind = ElementKind.NARRATIVE_TEXT
            meta["derived_from"] = "image"
        elif kind == ElementKind.TABLE:
            meta["caption"] = rng.choice([None, "Table 1 loads", "表2 参数"])
            meta["text_as_html"] = "<table><tbody><tr><td>x</td></tr></tbody></table>"
            if rng.random() < 0.2:
                text = ""
        elif kind == ElementKind.IMAGE:
            meta["error"] = "vision unavailable"
            meta["caption"] = rng.choice([None, "Figure 1 plant"])
            text = rng.choice(["", "alt text"])
        elif kind == ElementKind.TITLE:
            text = text[: rng.choice([12, 60, 400])]
        if rng.random() < 0.05:
            text = ""
        out.append(Element(kind=kind, text=text, seq=seq, metadata=ElementMetadata(**meta)))
    return out


def random_config(rng: random.Random, combine: bool = True) -> ChunkingConfig:
    max_chars = rng.choice([8, 30, 100, 300, 1000, 4096])
    new_after = rng.randint(1, max_chars)
    under = rng.randint(0, new_after) if combine and rng.random() < 0.5 else 0
    return ChunkingConfig(max_characters=max_chars, new_after_n_chars=new_after, combine_text_under_n_chars=under)


def expected_stream(elements: list[Element]) -> str:
    """Element texts the chunker must preserve, joined by its newline joiner."""
    drop = {ElementKind.HEADER, ElementKind.FOOTER}
    return "\n".join(e.text for e in elements if e.text and e.kind not in drop)


def check_chunks(elements: list[Element], cfg: ChunkingConfig, chunks) -> None:
    """Cap, ordering, seq coverage and (with no combining) boundary soundness."""
    by_seq = {e.seq: e for e in elements}
    covered = set()
    prev = None
    for chunk in chunks:
        assert 0 < chunk.char_count <= cfg.max_characters
        assert chunk.char_count == len(chunk.text)
        seqs = list(chunk.element_seqs)
        assert seqs == sorted(set(seqs))
        if prev is not None:
            assert seqs[0] >= prev.element_seqs[-1]
        covered.update(seqs)
        first = by_seq[seqs[0]]
        resumes_element = prev is not None and prev.element_seqs[-1] == seqs[0]
        title_led = first.kind == ElementKind.TITLE and not resumes_element
        if cfg.combine_text_under_n_chars == 0 and chunk.kind == "composite" and not title_led:
            # a continuation: no Title may be skipped between the previous chunk and this one
            lo = prev.element_seqs[-1] if prev is not None else -1
            skipped = [s for s in by_seq if lo < s <= seqs[0] and by_seq[s].kind == ElementKind.TITLE and by_seq[s].text]
            assert not skipped, (chunk, skipped)
            if prev is not None:
                assert chunk.section_title == prev.section_title
                assert chunk.continuation
        if title_led and cfg.combine_text_under_n_chars == 0:
            assert chunk.text.startswith(split_oracle(first.text, cfg.max_characters)[0])
        prev = chunk
    # a captioned table or image still yields a chunk when its own text is empty
    produced = {
        e.seq for e in elements
        if e.kind not in (ElementKind.HEADER, ElementKind.FOOTER)
        and (e.text or (e.kind == ElementKind.TABLE and e.metadata.caption))
    }
    assert covered == produced


# cleaning


def _nonspace(s: str) -> str:
    return "".join(ch for ch in s if not ch.isspace())


def check_clean_properties(text: str) -> None:
    out = clean(text)
    assert clean(out) == out
    kept, source = _nonspace(out), _nonspace(text)
    # only a prefix of bullet glyphs may disappear; everything else survives in order
    assert source.endswith(kept)
    assert set(source[: len(source) - len(kept)]) <= DEFAULT_BULLETS
    assert out == out.strip()
    assert "  " not in out
    assert all(line == line.strip() for line in out.split("\n"))


_LATIN = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:!?()-"
_CJK = "污水处理设备运行维护颗粒污泥曝气池。，！？、（）"
_SPACES = " \t\n\u3000\u00a0"


def random_clean_input(rng: random.Random) -> str:
    """Latin, CJK or mixed text with bullets, whitespace runs and line breaks."""
    flavour = rng.choice(["latin", "cjk", "mixed"])
    alphabet = {"latin": _LATIN, "cjk": _CJK, "mixed": _LATIN + _CJK}[flavour]
    parts = []
    if rng.random() < 0.4:
        parts.append(rng.choice(sorted(DEFAULT_BULLETS)) + rng.choice(["", " ", "  "]))
    for _ in range(rng.randint(0, 12)):
        parts.append("".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8))))
        parts.append("".join(rng.choice(_SPACES) for _ in range(rng.randint(0, 3))))
        if rng.random() < 0.1:
            parts.append(rng.choice(sorted(DEFAULT_BULLETS)))
    return "".join(parts)


# ranking


def brute_force(vectors: dict[str, np.ndarray], query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Reference ranking: float64 cosine over the original vectors, plain sort."""
    q = np.asarray(query, dtype=np.float64)
    scored = []
    for rid, v in vectors.items():
        v = np.asarray(v, dtype=np.float64)
        scored.append((rid, float(np.dot(v, q) / (np.sqrt(np.dot(v, v)) * np.sqrt(np.dot(q, q))))))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]
