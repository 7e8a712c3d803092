"""PlainDocument: a JSON interchange form of :class:`DocumentTree`.

Used for fixtures and for sources that never were ``.docx``. A document read
from this format goes through the same normalization as the docx reader, so
paragraphs with no visible text or image are dropped.
"""

from __future__ import annotations

import base64
import binascii
import json
from functools import lru_cache
from importlib import resources

import jsonschema

from .document import Cell, DocumentTree, Media, ParagraphBlock, Run, TableBlock, is_rectangular
from .errors import SchemaViolation

PD_VERSION = 1


@lru_cache(maxsize=1)
def _validator() -> jsonschema.protocols.Validator:
    text = resources.files("docrag").joinpath("schemas/plain_document.schema.json").read_text("utf-8")
    schema = json.loads(text)
    cls = jsonschema.validators.validator_for(schema)
    return cls(schema)


def _path(parts) -> str:
    return "/".join(str(p) for p in parts)


def open_plain_document(json_text: str | bytes, source_name: str | None = None) -> DocumentTree:
    """Build a :class:`DocumentTree` from PlainDocument JSON.

    ``source_name`` overrides the name stored in the document. Raises
    ``SchemaViolation`` naming the offending field.
    """
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("", f"invalid JSON: {exc}") from exc

    error = jsonschema.exceptions.best_match(_validator().iter_errors(doc))
    if error is not None:
        raise SchemaViolation(_path(error.absolute_path), error.message)

    media: dict[str, Media] = {}
    for media_id, entry in doc.get("media", {}).items():
        try:
            data = base64.b64decode(entry["data"], validate=True)
        except (binascii.Error, ValueError) as exc:
            raise SchemaViolation(f"media/{media_id}/data", "not valid base64") from exc
        media[media_id] = Media(data, entry["content_type"])

    blocks = []
    for i, raw in enumerate(doc["blocks"]):
        if "para" in raw:
            para = _para(raw["para"], media, f"blocks/{i}/para")
            if para is not None:
                blocks.append(para)
        else:
            blocks.append(_table(raw["table"], f"blocks/{i}/table"))

    return DocumentTree(
        blocks=tuple(blocks),
        media=media,
        source_name=source_name if source_name is not None else doc.get("source_name", ""),
        skipped=dict(sorted(doc.get("skipped", {}).items())),
    )


def _para(raw: dict, media: dict[str, Media], where: str) -> ParagraphBlock | None:
    if "runs" in raw:
        runs = []
        for j, run in enumerate(raw["runs"]):
            if "image" in run:
                if run["image"] not in media:
                    raise SchemaViolation(f"{where}/runs/{j}/image", f"unknown media id {run['image']!r}")
                runs.append(Run(image_anchor=run["image"], alt_text=run.get("alt_text", "")))
            else:
                runs.append(Run(text=run["text"], font_size_pts=run.get("font_size_pts"),
                                bold=run.get("bold", False)))
    else:
        text = raw.get("text", "")
        runs = [Run(text=text)] if text else []
    if not any(r.is_image for r in runs) and not "".join(r.text for r in runs).strip():
        return None
    return ParagraphBlock(
        runs=tuple(runs),
        style_name=raw.get("style_name"),
        outline_level=raw.get("outline_level"),
        list_marker=raw.get("list_marker", False),
        region=raw.get("region", "body"),
    )


def _table(raw: dict, where: str) -> TableBlock:
    rows = tuple(tuple(Cell(**cell) for cell in row) for row in raw["rows"])
    table = TableBlock(rows=rows, caption_hint=raw.get("caption_hint"), region=raw.get("region", "body"))
    if not is_rectangular(table):
        raise SchemaViolation(f"{where}/rows", "table is not rectangular after expanding spans")
    header_open = True
    for r, row in enumerate(rows):
        flags = [c.is_header for c in row]
        row_is_header = bool(row) and all(flags)
        if any(flags) and not (header_open and row_is_header):
            raise SchemaViolation(f"{where}/rows/{r}", "header cells must fill leading header rows")
        header_open = header_open and row_is_header
    return table


def to_plain_document(tree: DocumentTree) -> str:
    """Serialize ``tree`` so that :func:`open_plain_document` returns an equal tree."""
    blocks = []
    for block in tree.blocks:
        if isinstance(block, ParagraphBlock):
            runs = []
            for run in block.runs:
                if run.is_image:
                    item = {"image": run.image_anchor}
                    if run.alt_text:
                        item["alt_text"] = run.alt_text
                else:
                    item = {"text": run.text, "font_size_pts": run.font_size_pts, "bold": run.bold}
                runs.append(item)
            blocks.append({"para": {
                "runs": runs,
                "style_name": block.style_name,
                "outline_level": block.outline_level,
                "list_marker": block.list_marker,
                "region": block.region,
            }})
        else:
            blocks.append({"table": {
                "rows": [[{"text": c.text, "row_span": c.row_span, "col_span": c.col_span,
                           "is_header": c.is_header, "bold": c.bold} for c in row] for row in block.rows],
                "caption_hint": block.caption_hint,
                "region": block.region,
            }})
    doc = {
        "pd_version": PD_VERSION,
        "source_name": tree.source_name,
        "blocks": blocks,
        "media": {
            key: {"content_type": m.content_type, "data": base64.b64encode(m.data).decode("ascii")}
            for key, m in sorted(tree.media.items())
        },
        "skipped": dict(tree.skipped),
    }
    return json.dumps(doc, ensure_ascii=False, indent=1)
