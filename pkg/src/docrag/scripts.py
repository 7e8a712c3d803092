"""Character script helpers for CJK / Latin handling."""

from __future__ import annotations

import unicodedata

_CJK_RANGES = (
    (0x2E80, 0x2FDF),  # radicals
    (0x3000, 0x303F),  # CJK symbols and punctuation
    (0x3040, 0x30FF),  # hiragana, katakana
    (0x3100, 0x312F),  # bopomofo
    (0x3130, 0x318F),  # hangul compatibility jamo
    (0x31C0, 0x31EF),  # strokes
    (0x3200, 0x33FF),  # enclosed, compatibility
    (0x3400, 0x4DBF),  # extension A
    (0x4E00, 0x9FFF),  # unified ideographs
    (0xAC00, 0xD7AF),  # hangul syllables
    (0xF900, 0xFAFF),  # compatibility ideographs
    (0xFE30, 0xFE4F),  # compatibility forms
    (0xFF00, 0xFFEF),  # half/full-width forms
    (0x20000, 0x2FA1F),  # supplementary ideographs
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def is_latin_letter(ch: str) -> bool:
    if not ch.isalpha() or is_cjk(ch):
        return False
    try:
        return unicodedata.name(ch).startswith("LATIN")
    except ValueError:
        return False


def is_lower_latin(ch: str) -> bool:
    return ch.islower() and is_latin_letter(ch)


def script_of(text: str) -> str | None:
    """``"cjk"``, ``"mixed"``, ``"latin"`` or ``None`` for text without letters.

    CJK wins when it covers more than half of the non-whitespace characters;
    mixed needs both scripts above 10%.
    """
    chars = [c for c in text if not c.isspace()]
    if not chars:
        return None
    cjk = sum(1 for c in chars if is_cjk(c)) / len(chars)
    latin = sum(1 for c in chars if is_latin_letter(c)) / len(chars)
    if cjk > 0.5:
        return "cjk"
    if cjk > 0.1 and latin > 0.1:
        return "mixed"
    if latin > 0:
        return "latin"
    if cjk > 0:
        return "cjk"
    return None
