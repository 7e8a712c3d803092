"""Text normalization for Title and NarrativeText elements."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from typing import Sequence

from .partition import TEXT_KINDS, Element
from .scripts import is_cjk, is_lower_latin

DEFAULT_BULLETS = frozenset("•●◦▪・-–—*·")
# these double as minus signs and emphasis markers, so they only count as
# bullets when whitespace follows
_NEEDS_SPACE = frozenset("-*")
SENTENCE_END = frozenset(".。!?！？")


@dataclass(frozen=True)
class CleanConfig:
    bullet_chars: frozenset[str] = DEFAULT_BULLETS
    collapse_fullwidth_space: bool = True

    def __post_init__(self) -> None:
        if not self.bullet_chars:
            raise ValueError("bullet_chars must not be empty")
        object.__setattr__(self, "bullet_chars", frozenset(self.bullet_chars))


def _horizontal_ws(cfg: CleanConfig) -> re.Pattern[str]:
    # every Unicode whitespace except the newline, and U+3000 only when enabled
    excluded = "\n" if cfg.collapse_fullwidth_space else "\n　"
    return re.compile(rf"[^\S{excluded}]+")


def clean_extra_whitespace(text: str, cfg: CleanConfig = CleanConfig()) -> str:
    """Collapse horizontal whitespace runs to one space and trim every line."""
    ws = _horizontal_ws(cfg)
    lines = [ws.sub(" ", line).strip(" ") for line in text.split("\n")]
    return "\n".join(lines).strip()


def clean_bullets(text: str, cfg: CleanConfig = CleanConfig()) -> str:
    """Strip one leading bullet glyph and the whitespace right after it."""
    if not text or text[0] not in cfg.bullet_chars:
        return text
    rest = text[1:]
    if text[0] in _NEEDS_SPACE and rest and not rest[0].isspace():
        return text
    return rest.lstrip()


def _joiner(prev: str, nxt: str) -> str | None:
    """Joiner for a line break between ``prev`` and ``nxt``, or None to keep it."""
    tail = prev.rstrip()
    head = nxt.lstrip()
    if not tail or not head:
        return None
    if tail[-1] in SENTENCE_END:
        return None
    first = head[0]
    if is_cjk(first):
        return "" if is_cjk(tail[-1]) else " "
    if is_lower_latin(first):
        return " "
    return None


def group_broken_paragraphs(text: str) -> str:
    """Re-join lines broken mid-sentence.

    A line break turns into a space (or nothing, between two CJK characters)
    when the next line starts with a lowercase Latin letter or a CJK
    character and the previous line does not end a sentence. Blank lines
    separating paragraphs collapse to a single newline.
    """
    out = ""
    boundary = False
    for line in text.split("\n"):
        if not line.strip():
            boundary = True
            continue
        if not out:
            out = line
        elif boundary:
            out += "\n" + line
        else:
            joiner = _joiner(out, line)
            out = out + "\n" + line if joiner is None else out.rstrip() + joiner + line.lstrip()
        boundary = False
    return out


def clean(text: str, cfg: CleanConfig = CleanConfig()) -> str:
    """Whitespace, bullet and line-join passes, repeated until nothing changes.

    Every pass either shortens the text or replaces a newline, so the loop
    terminates; stacked bullet prefixes take one pass each.
    """
    while True:
        result = group_broken_paragraphs(clean_bullets(clean_extra_whitespace(text, cfg), cfg))
        if result == text:
            return result
        text = result


def clean_elements(elements: Sequence[Element], cfg: CleanConfig = CleanConfig()) -> list[Element]:
    """Clean text-kind elements; elements left empty are dropped."""
    out = []
    for element in elements:
        if element.kind in TEXT_KINDS and not element.is_image_derived:
            text = clean(element.text, cfg)
            if not text:
                continue
            element = dataclasses.replace(element, text=text)
        out.append(element)
    return out
