"""Caption association, table HTML and image-to-text substitution."""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .document import Media
from .errors import TransportError, VisionUnavailable
from .http import post_json
from .partition import Element, ElementKind
from .tables import render_table_html

log = logging.getLogger(__name__)

PROMPT_VERSION = 1
# bump PROMPT_VERSION whenever this wording changes
VISION_PROMPT = (
    "Describe this image for a technical knowledge base. State the information it carries: "
    "named components, process steps in order, quantities with units, axis labels and trends. "
    "Write plain prose without preamble."
)


@dataclass(frozen=True)
class CaptionRule:
    table_patterns: tuple[str, ...] = (r"Table\s*\d+", r"表\s*\d+", r"Tab\.\s*\d+")
    figure_patterns: tuple[str, ...] = (r"Fig\.", r"Figure\s*\d+", r"图\s*\d+")
    search_window: int = 2

    def __post_init__(self) -> None:
        if self.search_window < 1:
            raise ValueError("search_window must be >= 1")

    def matcher(self, kind: ElementKind) -> re.Pattern[str]:
        patterns = self.table_patterns if kind == ElementKind.TABLE else self.figure_patterns
        return re.compile(r"^\s*(?:" + "|".join(patterns) + ")", re.IGNORECASE)


_CAPTION_SOURCES = frozenset({ElementKind.NARRATIVE_TEXT, ElementKind.UNCATEGORIZED})


def associate_captions(elements: Sequence[Element], rule: CaptionRule = CaptionRule()) -> list[Element]:
    """Give each Table/Image the nearest caption-like text within the window.

    At equal distance the preceding candidate wins. Caption elements stay in
    the sequence. A caption already present (e.g. from the table properties)
    is kept.
    """
    out = list(elements)
    for i, element in enumerate(elements):
        if element.kind not in (ElementKind.TABLE, ElementKind.IMAGE) or element.metadata.caption:
            continue
        pattern = rule.matcher(element.kind)
        for distance in range(1, rule.search_window + 1):
            found = None
            for j in (i - distance, i + distance):
                if 0 <= j < len(elements):
                    cand = elements[j]
                    if cand.kind in _CAPTION_SOURCES and pattern.match(cand.text):
                        found = cand.text.strip()
                        break
            if found:
                out[i] = dataclasses.replace(element, metadata=dataclasses.replace(element.metadata, caption=found))
                break
    return out


def attach_table_html(elements: Sequence[Element]) -> list[Element]:
    """Fill ``text_as_html`` for Table elements that still carry their grid."""
    out = []
    for element in elements:
        if element.kind == ElementKind.TABLE and element.table is not None:
            html = render_table_html(element.table, element.metadata.caption)
            element = dataclasses.replace(element, metadata=dataclasses.replace(element.metadata, text_as_html=html))
        out.append(element)
    return out


class VisionClient(Protocol):
    def describe(self, image: bytes, content_type: str, prompt: str) -> str: ...


class MockVisionClient:
    """Deterministic offline stand-in: the description is a digest of the bytes."""

    def __init__(self) -> None:
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    def describe(self, image: bytes, content_type: str, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
        return "IMG-DESC:" + hashlib.sha256(image).hexdigest()


class HttpVisionClient:
    """Vision service speaking ``{model, prompt, image: {data, media_type}} -> {text}``."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, *,
                 timeout: float = 60.0, retries: int = 2, backoff: float = 0.5):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def describe(self, image: bytes, content_type: str, prompt: str) -> str:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "image": {"data": base64.b64encode(image).decode("ascii"), "media_type": content_type},
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            reply = post_json(self.endpoint, payload, headers=headers, timeout=self.timeout,
                              retries=self.retries, backoff=self.backoff)
        except TransportError as exc:
            raise VisionUnavailable(str(exc)) from exc
        text = reply.get("text")
        if not isinstance(text, str):
            raise VisionUnavailable(f"{self.endpoint} reply has no text field")
        return text


def build_vision_prompt(caption: str | None, alt_text: str = "") -> str:
    lines = [VISION_PROMPT]
    if caption:
        lines.append(f"Caption: {caption}")
    if alt_text:
        lines.append(f"Alt text: {alt_text}")
    return "\n".join(lines)


def describe_images(
    elements: Sequence[Element],
    client: VisionClient,
    media: Mapping[str, Media],
    *,
    max_in_flight: int = 4,
) -> list[Element]:
    """Replace each Image element, in place, by a text element holding its description.

    Calls run concurrently (at most ``max_in_flight``) but results are
    committed in document order. An image whose description fails stays an
    Image element with ``metadata.error`` set.
    """
    jobs = [i for i, e in enumerate(elements) if e.kind == ElementKind.IMAGE]
    out = list(elements)
    if not jobs:
        return out

    def run(i: int) -> Element:
        element = elements[i]
        ref = element.metadata.image_ref
        item = media.get(ref or "")
        if item is None:
            return _failed(element, f"media {ref!r} not found")
        prompt = build_vision_prompt(element.metadata.caption, element.text)
        try:
            text = client.describe(item.data, item.content_type, prompt).strip()
        except VisionUnavailable as exc:
            log.warning("image description failed seq=%d source=%s error=%s",
                        element.seq, element.metadata.source_name, exc)
            return _failed(element, str(exc))
        if not text:
            return _failed(element, "empty description")
        meta = dataclasses.replace(element.metadata, image_ref=None, derived_from="image")
        return dataclasses.replace(element, kind=ElementKind.NARRATIVE_TEXT, text=text, metadata=meta)

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        for i, result in zip(jobs, pool.map(run, jobs)):
            out[i] = result
    return out


def _failed(element: Element, reason: str) -> Element:
    return dataclasses.replace(element, metadata=dataclasses.replace(element.metadata, error=reason))
