"""Classify document blocks into typed elements."""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .document import DocumentTree, ParagraphBlock, Run, TableBlock
from .scripts import script_of
from .tables import render_table_text


class ElementKind(str, enum.Enum):
    TITLE = "Title"
    NARRATIVE_TEXT = "NarrativeText"
    TABLE = "Table"
    IMAGE = "Image"
    HEADER = "Header"
    FOOTER = "Footer"
    UNCATEGORIZED = "Uncategorized"


TEXT_KINDS = frozenset({ElementKind.TITLE, ElementKind.NARRATIVE_TEXT, ElementKind.UNCATEGORIZED})
DEFAULT_DROP = frozenset({ElementKind.HEADER, ElementKind.FOOTER})
TITLE_TERMINATORS = (".", "。", "!", "?", "！", "？")


@dataclass(frozen=True)
class ElementMetadata:
    source_name: str = ""
    text_as_html: str | None = None
    image_ref: str | None = None
    caption: str | None = None
    section_path: tuple[str, ...] = ()
    languages: frozenset[str] = frozenset()
    # set on elements produced from an image description
    derived_from: str | None = None
    error: str | None = None


@dataclass(frozen=True)
class Element:
    kind: ElementKind
    text: str
    seq: int
    metadata: ElementMetadata = field(default_factory=ElementMetadata)
    # source grid for Table elements; not serialized
    table: TableBlock | None = field(default=None, compare=False, repr=False)

    @property
    def is_image_derived(self) -> bool:
        return self.metadata.derived_from == "image"


@dataclass(frozen=True)
class PartitionRules:
    heading_style_patterns: tuple[str, ...] = ("heading", "title", "标题")
    size_ratio_threshold: float = 1.2
    max_title_words: int = 20
    max_title_chars_cjk: int = 40

    def __post_init__(self) -> None:
        if not self.size_ratio_threshold > 1.0:
            raise ValueError("size_ratio_threshold must be > 1.0")
        if self.max_title_words <= 0 or self.max_title_chars_cjk <= 0:
            raise ValueError("title length limits must be positive")


def _dominant_size(runs: Iterable[Run]) -> float | None:
    """Font size covering the most characters; ties go to the larger size."""
    weights: Counter[float] = Counter()
    for run in runs:
        if run.text and run.font_size_pts is not None:
            weights[run.font_size_pts] += len(run.text.strip()) or len(run.text)
    if not weights:
        return None
    return max(weights.items(), key=lambda kv: (kv[1], kv[0]))[0]


def body_mode_size(tree: DocumentTree) -> float | None:
    """Most common paragraph size among body paragraphs; ties go to the smaller size."""
    counts: Counter[float] = Counter()
    for block in tree.blocks:
        if isinstance(block, ParagraphBlock) and block.region == "body":
            size = _dominant_size(block.runs)
            if size is not None:
                counts[size] += 1
    if not counts:
        return None
    return max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]


def _heading_level(style_name: str | None) -> int | None:
    if not style_name:
        return None
    m = re.search(r"(\d+)\s*$", style_name)
    return max(int(m.group(1)) - 1, 0) if m else None


def _style_is_heading(style_name: str | None, rules: PartitionRules) -> bool:
    if not style_name:
        return False
    lowered = style_name.lower()
    return any(p.lower() in lowered for p in rules.heading_style_patterns)


def _short_enough(text: str, rules: PartitionRules) -> bool:
    if script_of(text) == "cjk":
        return sum(1 for c in text if not c.isspace()) <= rules.max_title_chars_cjk
    return len(text.split()) <= rules.max_title_words


def classify_paragraph(
    para: ParagraphBlock, body_size: float | None, rules: PartitionRules = PartitionRules()
) -> ElementKind:
    """Title rule: explicit outline level, a heading-like style name, or a
    font noticeably larger than body text on a short unpunctuated line."""
    text = para.text.strip()
    if not any(c.isalnum() for c in text):
        return ElementKind.UNCATEGORIZED
    if para.outline_level is not None:
        return ElementKind.TITLE
    if _style_is_heading(para.style_name, rules):
        return ElementKind.TITLE
    size = _dominant_size(para.runs)
    if (
        size is not None
        and body_size is not None
        and size >= rules.size_ratio_threshold * body_size
        and _short_enough(text, rules)
        and not text.endswith(TITLE_TERMINATORS)
    ):
        return ElementKind.TITLE
    return ElementKind.NARRATIVE_TEXT


def _languages(text: str) -> frozenset[str]:
    label = script_of(text)
    return frozenset({label}) if label else frozenset()


class _SectionStack:
    # titles without a known level sit below every levelled title
    UNLEVELLED = 99

    def __init__(self) -> None:
        self.stack: list[tuple[int, str]] = []

    def push(self, level: int | None, text: str) -> None:
        lvl = self.UNLEVELLED if level is None else level
        while self.stack and self.stack[-1][0] >= lvl:
            self.stack.pop()
        self.stack.append((lvl, text))

    @property
    def path(self) -> tuple[str, ...]:
        return tuple(text for _, text in self.stack)


def partition(tree: DocumentTree, rules: PartitionRules = PartitionRules()) -> list[Element]:
    """Map every block to elements in document order.

    Header and footer blocks become Header/Footer elements, tables become
    Table elements and image runs are split out of their paragraph as Image
    elements, keeping their position relative to the surrounding text.
    """
    body_size = body_mode_size(tree)
    sections = _SectionStack()
    out: list[Element] = []
    source = tree.source_name

    def emit(kind: ElementKind, text: str, **meta) -> None:
        meta.setdefault("section_path", sections.path)
        meta.setdefault("languages", _languages(text))
        table = meta.pop("table", None)
        out.append(Element(kind, text, len(out), ElementMetadata(source_name=source, **meta), table))

    for block in tree.blocks:
        if block.region != "body":
            kind = ElementKind.HEADER if block.region == "header" else ElementKind.FOOTER
            text = block.text if isinstance(block, ParagraphBlock) else render_table_text(block)
            emit(kind, text, section_path=())
            continue
        if isinstance(block, TableBlock):
            emit(ElementKind.TABLE, render_table_text(block), table=block, caption=block.caption_hint)
            continue

        kind = classify_paragraph(block, body_size, rules)
        if kind == ElementKind.TITLE:
            level = block.outline_level
            if level is None:
                level = _heading_level(block.style_name)
            sections.push(level, block.text.strip())
        segment: list[str] = []
        for run in block.runs:
            if run.is_image:
                if "".join(segment).strip():
                    emit(kind, "".join(segment))
                segment.clear()
                emit(ElementKind.IMAGE, run.alt_text, image_ref=run.image_anchor)
            else:
                segment.append(run.text)
        if "".join(segment).strip():
            emit(kind, "".join(segment))
    return out


def filter_elements(
    elements: Sequence[Element], drop: Iterable[ElementKind] = DEFAULT_DROP
) -> list[Element]:
    """Drop elements whose kind is in ``drop``; survivors keep order and seq."""
    dropped = frozenset(drop)
    return [e for e in elements if e.kind not in dropped]
