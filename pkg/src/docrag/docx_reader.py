"""Read a ``.docx`` package (zip of OOXML parts) into a :class:`DocumentTree`.

Only the standard library is used: ``zipfile`` for the package and
``xml.etree.ElementTree`` for the parts. Formatting is resolved through the
usual chain: run properties, then the run style, then the paragraph style
(following ``basedOn``), then the document defaults. When that chain never
states a font size the run records ``None`` rather than a guess.
"""

from __future__ import annotations

import io
import logging
import mimetypes
import posixpath
import zipfile
from collections import Counter
from dataclasses import dataclass, field
from xml.etree import ElementTree as ET

from .document import Block, Cell, DocumentTree, Media, ParagraphBlock, Region, Run, TableBlock
from .errors import MalformedXml, MissingDocumentPart, NotZip

log = logging.getLogger(__name__)

W_NS = "http://schemas.openxmlformats.org/wordprocessingml/2006/main"
R_NS = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"
A_NS = "http://schemas.openxmlformats.org/drawingml/2006/main"
WP_NS = "http://schemas.openxmlformats.org/drawingml/2006/wordprocessingDrawing"
V_NS = "urn:schemas-microsoft-com:vml"
MC_NS = "http://schemas.openxmlformats.org/markup-compatibility/2006"
PKG_REL_NS = "http://schemas.openxmlformats.org/package/2006/relationships"
CT_NS = "http://schemas.openxmlformats.org/package/2006/content-types"

REL_OFFICE_DOCUMENT = "/officeDocument"
REL_HEADER = "/header"
REL_FOOTER = "/footer"

# metafiles and SVG are vector content; the image path only wants rasters
VECTOR_CONTENT_TYPES = frozenset({"image/x-emf", "image/x-wmf", "image/emf", "image/wmf", "image/svg+xml"})


def w(tag: str) -> str:
    return f"{{{W_NS}}}{tag}"


def _val(el: ET.Element | None, attr: str = "val") -> str | None:
    if el is None:
        return None
    return el.get(w(attr))


def _on_off(el: ET.Element | None) -> bool | None:
    """Tri-state for OOXML toggle properties such as ``<w:b/>``."""
    if el is None:
        return None
    return _val(el) not in ("0", "false", "off")


def _half_points(el: ET.Element | None) -> float | None:
    raw = _val(el)
    if raw is None:
        return None
    try:
        return int(raw) / 2.0
    except ValueError:
        return None


@dataclass
class _Style:
    style_id: str
    name: str | None
    kind: str | None
    based_on: str | None
    size: float | None
    bold: bool | None
    outline_level: int | None
    numbered: bool | None
    default: bool = False


@dataclass
class _Styles:
    by_id: dict[str, _Style] = field(default_factory=dict)
    default_size: float | None = None
    default_bold: bool | None = None
    default_paragraph: str | None = None

    def chain(self, style_id: str | None) -> list[_Style]:
        out: list[_Style] = []
        seen: set[str] = set()
        while style_id and style_id in self.by_id and style_id not in seen:
            seen.add(style_id)
            style = self.by_id[style_id]
            out.append(style)
            style_id = style.based_on
        return out

    def lookup(self, style_id: str | None, attr: str):
        for style in self.chain(style_id):
            value = getattr(style, attr)
            if value is not None:
                return value
        return None


def _parse_styles(root: ET.Element | None) -> _Styles:
    styles = _Styles()
    if root is None:
        return styles
    rpr_default = root.find(f"{w('docDefaults')}/{w('rPrDefault')}/{w('rPr')}")
    if rpr_default is not None:
        styles.default_size = _half_points(rpr_default.find(w("sz")))
        styles.default_bold = _on_off(rpr_default.find(w("b")))
    for el in root.findall(w("style")):
        style_id = el.get(w("styleId"))
        if not style_id:
            continue
        ppr = el.find(w("pPr"))
        rpr = el.find(w("rPr"))
        outline = None
        numbered = None
        if ppr is not None:
            outline = _outline_level(ppr.find(w("outlineLvl")))
            numpr = ppr.find(w("numPr"))
            if numpr is not None:
                numbered = _val(numpr.find(w("numId"))) not in (None, "0")
        style = _Style(
            style_id=style_id,
            name=_val(el.find(w("name"))),
            kind=el.get(w("type")),
            based_on=_val(el.find(w("basedOn"))),
            size=_half_points(rpr.find(w("sz"))) if rpr is not None else None,
            bold=_on_off(rpr.find(w("b"))) if rpr is not None else None,
            outline_level=outline,
            numbered=numbered,
            default=el.get(w("default")) in ("1", "true", "on"),
        )
        styles.by_id[style_id] = style
        if style.default and style.kind == "paragraph":
            styles.default_paragraph = style_id
    return styles


def _outline_level(el: ET.Element | None) -> int | None:
    raw = _val(el)
    if raw is None:
        return None
    try:
        level = int(raw)
    except ValueError:
        return None
    # 9 is Word's "body text" level
    if level < 0 or level >= 9:
        return None
    return level


@dataclass
class _Part:
    name: str
    root: ET.Element
    rels: dict[str, tuple[str, str, bool]]  # rId -> (type, resolved target, external)


class _Package:
    def __init__(self, data: bytes, source_name: str):
        try:
            self.zip = zipfile.ZipFile(io.BytesIO(data))
        except (zipfile.BadZipFile, ValueError) as exc:
            raise NotZip(f"{source_name or 'input'} is not a zip archive") from exc
        self.names = set(self.zip.namelist())
        self.content_types = self._content_types()

    def xml(self, name: str) -> ET.Element | None:
        if name not in self.names:
            return None
        raw = self.zip.read(name)
        try:
            return ET.fromstring(raw)
        except ET.ParseError as exc:
            raise MalformedXml(name, getattr(exc, "position", None), str(exc)) from exc

    def rels(self, part: str) -> dict[str, tuple[str, str, bool]]:
        directory, base = posixpath.split(part)
        root = self.xml(posixpath.join(directory, "_rels", base + ".rels"))
        out: dict[str, tuple[str, str, bool]] = {}
        if root is None:
            return out
        for rel in root.findall(f"{{{PKG_REL_NS}}}Relationship"):
            rid = rel.get("Id")
            target = rel.get("Target", "")
            if not rid:
                continue
            external = rel.get("TargetMode") == "External"
            if not external:
                target = _resolve(directory, target)
            out[rid] = (rel.get("Type", ""), target, external)
        return out

    def part(self, name: str) -> _Part | None:
        root = self.xml(name)
        if root is None:
            return None
        return _Part(name, root, self.rels(name))

    def content_type(self, name: str) -> str:
        overrides, defaults = self.content_types
        if name in overrides:
            return overrides[name]
        ext = posixpath.splitext(name)[1].lstrip(".").lower()
        if ext in defaults:
            return defaults[ext]
        return mimetypes.guess_type(name)[0] or "application/octet-stream"

    def _content_types(self) -> tuple[dict[str, str], dict[str, str]]:
        overrides: dict[str, str] = {}
        defaults: dict[str, str] = {}
        root = self.xml("[Content_Types].xml")
        if root is None:
            return overrides, defaults
        for el in root.findall(f"{{{CT_NS}}}Override"):
            overrides[el.get("PartName", "").lstrip("/")] = el.get("ContentType", "")
        for el in root.findall(f"{{{CT_NS}}}Default"):
            defaults[el.get("Extension", "").lower()] = el.get("ContentType", "")
        return overrides, defaults

    def main_part_name(self) -> str:
        root_rels = self.rels("")
        for kind, target, external in root_rels.values():
            if kind.endswith(REL_OFFICE_DOCUMENT) and not external:
                return target
        return "word/document.xml"


def _resolve(directory: str, target: str) -> str:
    if target.startswith("/"):
        return posixpath.normpath(target.lstrip("/"))
    return posixpath.normpath(posixpath.join(directory, target))


class _Reader:
    def __init__(self, pkg: _Package, styles: _Styles):
        self.pkg = pkg
        self.styles = styles
        self.media: dict[str, Media] = {}
        self.skipped: Counter[str] = Counter()

    # -- block level -------------------------------------------------------

    def blocks(self, container: ET.Element, part: _Part, region: Region) -> list[Block]:
        out: list[Block] = []
        for child in container:
            tag = child.tag
            if tag == w("p"):
                para = self.paragraph(child, part, region)
                if para is not None:
                    out.append(para)
            elif tag == w("tbl"):
                out.append(self.table(child, part, region))
            elif tag == w("sdt"):
                content = child.find(w("sdtContent"))
                if content is not None:
                    out.extend(self.blocks(content, part, region))
            elif tag == w("customXml"):
                out.extend(self.blocks(child, part, region))
            elif tag == w("altChunk"):
                self.skipped["alt_chunks"] += 1
        return out

    def paragraph(self, p: ET.Element, part: _Part, region: Region) -> ParagraphBlock | None:
        ppr = p.find(w("pPr"))
        style_id = _val(ppr.find(w("pStyle"))) if ppr is not None else None
        para_style = style_id or self.styles.default_paragraph

        outline = _outline_level(ppr.find(w("outlineLvl"))) if ppr is not None else None
        if outline is None:
            outline = self.styles.lookup(para_style, "outline_level")

        numbered = None
        if ppr is not None and ppr.find(w("numPr")) is not None:
            numbered = _val(ppr.find(f"{w('numPr')}/{w('numId')}")) not in (None, "0")
        if numbered is None:
            numbered = bool(self.styles.lookup(para_style, "numbered"))

        runs: list[Run] = []
        self._collect_runs(p, part, para_style, runs)
        runs = _merge_runs(runs)
        if not any(r.is_image for r in runs) and not "".join(r.text for r in runs).strip():
            return None

        style_name = None
        if style_id:
            style = self.styles.by_id.get(style_id)
            style_name = (style.name if style and style.name else style_id)
        return ParagraphBlock(
            runs=tuple(runs),
            style_name=style_name,
            outline_level=outline,
            list_marker=numbered,
            region=region,
        )

    def table(self, tbl: ET.Element, part: _Part, region: Region) -> TableBlock:
        rows: list[list[dict]] = []
        anchors: dict[int, dict] = {}  # grid column -> cell open for vertical merge
        header_open = True
        for tr in tbl.findall(w("tr")):
            trpr = tr.find(w("trPr"))
            is_header = header_open and trpr is not None and _on_off(trpr.find(w("tblHeader"))) is True
            header_open = is_header
            row: list[dict] = []
            col = 0
            before = _int(_val(trpr.find(w("gridBefore")))) if trpr is not None else 0
            if before:
                row.append(_blank_cell(before, is_header))
                col += before
            for tc in _table_cells(tr):
                tcpr = tc.find(w("tcPr"))
                span = max(1, _int(_val(tcpr.find(w("gridSpan")))) if tcpr is not None else 1)
                vmerge = tcpr.find(w("vMerge")) if tcpr is not None else None
                text, bold = self._cell_text(tc, part)
                if vmerge is not None and _val(vmerge) in (None, "continue") and col in anchors:
                    anchor = anchors[col]
                    anchor["row_span"] += 1
                    if text:
                        anchor["text"] = f"{anchor['text']}\n{text}" if anchor["text"] else text
                else:
                    cell = {"text": text, "row_span": 1, "col_span": span,
                            "is_header": is_header, "bold": bold}
                    row.append(cell)
                    for c in range(col, col + span):
                        anchors.pop(c, None)
                    if vmerge is not None:
                        anchors[col] = cell
                col += span
            after = _int(_val(trpr.find(w("gridAfter")))) if trpr is not None else 0
            if after:
                row.append(_blank_cell(after, is_header))
            rows.append(row)
        caption = None
        tblpr = tbl.find(w("tblPr"))
        if tblpr is not None:
            caption = _val(tblpr.find(w("tblCaption"))) or None
        return TableBlock(rows=_rectangular(rows), caption_hint=caption, region=region)

    def _cell_text(self, tc: ET.Element, part: _Part) -> tuple[str, bool]:
        lines: list[str] = []
        bold_flags: list[bool] = []
        for block in self.blocks(tc, part, "body"):
            if isinstance(block, ParagraphBlock):
                text = block.text
                if text.strip():
                    lines.append(text)
                    bold_flags.extend(r.bold for r in block.runs if r.text.strip())
            else:
                # nested table: flatten row-wise
                for row in block.rows:
                    joined = " ".join(c.text for c in row if c.text)
                    if joined:
                        lines.append(joined)
        return "\n".join(lines), bool(bold_flags) and all(bold_flags)

    # -- run level ---------------------------------------------------------

    def _collect_runs(self, el: ET.Element, part: _Part, para_style: str | None, out: list[Run]) -> None:
        for child in el:
            tag = child.tag
            if tag == w("r"):
                self._run(child, part, para_style, out)
            elif tag in (w("hyperlink"), w("smartTag"), w("ins"), w("moveTo"), w("customXml"),
                         w("fldSimple"), w("dir"), w("bdo")):
                self._collect_runs(child, part, para_style, out)
            elif tag == w("sdt"):
                content = child.find(w("sdtContent"))
                if content is not None:
                    self._collect_runs(content, part, para_style, out)
            # w:del, w:moveFrom, w:pPr, bookmarks and proofing marks carry no visible text

    def _run(self, r: ET.Element, part: _Part, para_style: str | None, out: list[Run]) -> None:
        rpr = r.find(w("rPr"))
        size = _half_points(rpr.find(w("sz"))) if rpr is not None else None
        bold = _on_off(rpr.find(w("b"))) if rpr is not None else None
        run_style = _val(rpr.find(w("rStyle"))) if rpr is not None else None
        if size is None:
            size = self.styles.lookup(run_style, "size")
        if bold is None:
            bold = self.styles.lookup(run_style, "bold")
        if size is None:
            size = self.styles.lookup(para_style, "size")
        if bold is None:
            bold = self.styles.lookup(para_style, "bold")
        if size is None:
            size = self.styles.default_size
        if bold is None:
            bold = self.styles.default_bold
        bold = bool(bold)

        buf: list[str] = []

        def flush() -> None:
            if buf:
                out.append(Run(text="".join(buf), font_size_pts=size, bold=bold))
                buf.clear()

        for child in r:
            tag = child.tag
            if tag == w("t"):
                buf.append(child.text or "")
            elif tag == w("tab"):
                buf.append("\t")
            elif tag in (w("br"), w("cr")):
                if child.get(w("type")) in (None, "textWrapping"):
                    buf.append("\n")
            elif tag == w("noBreakHyphen"):
                buf.append("-")
            elif tag == w("drawing"):
                flush()
                self._drawing(child, part, out)
            elif tag == w("pict"):
                flush()
                self._vml(child, part, out)
            elif tag == f"{{{MC_NS}}}AlternateContent":
                flush()
                self._alternate(child, part, out)
            elif tag == w("object"):
                self.skipped["ole_objects"] += 1
        flush()

    def _alternate(self, el: ET.Element, part: _Part, out: list[Run]) -> None:
        # prefer the first choice that yields a raster; fall back to the fallback
        for branch in list(el.findall(f"{{{MC_NS}}}Choice")) + list(el.findall(f"{{{MC_NS}}}Fallback")):
            drawing = branch.find(w("drawing"))
            if drawing is not None and drawing.find(f".//{{{A_NS}}}blip") is not None:
                self._drawing(drawing, part, out)
                return
            pict = branch.find(w("pict"))
            if pict is not None and pict.find(f".//{{{V_NS}}}imagedata") is not None:
                self._vml(pict, part, out)
                return
        self.skipped["vector_drawings"] += 1

    def _drawing(self, drawing: ET.Element, part: _Part, out: list[Run]) -> None:
        blips = drawing.findall(f".//{{{A_NS}}}blip")
        if not blips:
            self.skipped["vector_drawings"] += 1
            return
        doc_pr = drawing.find(f".//{{{WP_NS}}}docPr")
        alt = (doc_pr.get("descr") or doc_pr.get("title") or "") if doc_pr is not None else ""
        for blip in blips:
            self._image(blip.get(f"{{{R_NS}}}embed"), part, alt, out)

    def _vml(self, pict: ET.Element, part: _Part, out: list[Run]) -> None:
        data = pict.findall(f".//{{{V_NS}}}imagedata")
        if not data:
            self.skipped["vector_drawings"] += 1
            return
        for el in data:
            self._image(el.get(f"{{{R_NS}}}id"), part, el.get(f"{{{V_NS}}}title") or "", out)

    def _image(self, rid: str | None, part: _Part, alt: str, out: list[Run]) -> None:
        rel = part.rels.get(rid or "")
        if rel is None:
            self.skipped["unresolved_images"] += 1
            return
        _, target, external = rel
        if external:
            self.skipped["external_images"] += 1
            return
        if target not in self.pkg.names:
            self.skipped["unresolved_images"] += 1
            return
        content_type = self.pkg.content_type(target)
        if content_type in VECTOR_CONTENT_TYPES or not content_type.startswith("image/"):
            self.skipped["vector_drawings"] += 1
            return
        if target not in self.media:
            self.media[target] = Media(self.pkg.zip.read(target), content_type)
        out.append(Run(image_anchor=target, alt_text=alt.strip()))


def _table_cells(tr: ET.Element):
    for child in tr:
        if child.tag == w("tc"):
            yield child
        elif child.tag in (w("sdt"), w("customXml")):
            content = child.find(w("sdtContent")) if child.tag == w("sdt") else child
            if content is not None:
                yield from (tc for tc in content if tc.tag == w("tc"))


def _int(raw: str | None) -> int:
    try:
        return int(raw) if raw is not None else 0
    except ValueError:
        return 0


def _blank_cell(span: int, is_header: bool) -> dict:
    return {"text": "", "row_span": 1, "col_span": span, "is_header": is_header, "bold": False}


def _rectangular(rows: list[list[dict]]) -> tuple[tuple[Cell, ...], ...]:
    """Freeze raw rows, padding ragged rows with empty cells."""
    height = len(rows)
    widths = [0] * height
    for r, row in enumerate(rows):
        for cell in row:
            cell["row_span"] = min(cell["row_span"], height - r)
            for dr in range(cell["row_span"]):
                widths[r + dr] += cell["col_span"]
    full = max(widths, default=0)
    frozen = []
    for r, row in enumerate(rows):
        cells = [Cell(**cell) for cell in row]
        missing = full - widths[r]
        if missing:
            header = bool(cells) and all(c.is_header for c in cells)
            cells.append(Cell(text="", col_span=missing, is_header=header))
        frozen.append(tuple(cells))
    return tuple(frozen)


def _merge_runs(runs: list[Run]) -> list[Run]:
    """Join adjacent text runs that share formatting."""
    merged: list[Run] = []
    for run in runs:
        prev = merged[-1] if merged else None
        if (prev is not None and not prev.is_image and not run.is_image
                and prev.font_size_pts == run.font_size_pts and prev.bold == run.bold):
            merged[-1] = Run(text=prev.text + run.text, font_size_pts=run.font_size_pts, bold=run.bold)
        elif run.is_image or run.text:
            merged.append(run)
    return merged


def _section_refs(body: ET.Element) -> list[tuple[str, str]]:
    """Header/footer relationship ids in the order sections reference them."""
    refs: list[tuple[str, str]] = []
    # paragraph-level sectPr close earlier sections; the body-level one is the last section
    sect_prs = body.findall(f"{w('p')}/{w('pPr')}/{w('sectPr')}") + body.findall(w("sectPr"))
    for sect in sect_prs:
        for child in sect:
            if child.tag in (w("headerReference"), w("footerReference")):
                rid = child.get(f"{{{R_NS}}}id")
                if rid:
                    refs.append(("header" if child.tag == w("headerReference") else "footer", rid))
    return refs


def open_docx(data: bytes, source_name: str = "") -> DocumentTree:
    """Parse ``.docx`` bytes into a :class:`DocumentTree`.

    Body blocks keep document order. Header blocks precede them and footer
    blocks follow them, each tagged with its region. Paragraphs without any
    visible text or image are dropped. Raises ``NotZip``,
    ``MissingDocumentPart`` or ``MalformedXml``.
    """
    pkg = _Package(data, source_name)
    main_name = pkg.main_part_name()
    main = pkg.part(main_name)
    if main is None:
        raise MissingDocumentPart(f"{source_name or 'input'} has no {main_name}")
    body = main.root.find(w("body"))
    if body is None:
        raise MissingDocumentPart(f"{main_name} has no w:body element")

    styles_name = None
    for kind, target, external in main.rels.values():
        if kind.endswith("/styles") and not external:
            styles_name = target
    styles = _parse_styles(pkg.xml(styles_name or "word/styles.xml"))
    reader = _Reader(pkg, styles)

    body_blocks = reader.blocks(body, main, "body")

    region_parts: dict[str, list[str]] = {"header": [], "footer": []}
    for region, rid in _section_refs(body):
        rel = main.rels.get(rid)
        if rel and not rel[2] and rel[1] not in region_parts[region]:
            region_parts[region].append(rel[1])
    for kind, target, external in sorted(main.rels.values(), key=lambda rel: rel[1]):
        for region, suffix in (("header", REL_HEADER), ("footer", REL_FOOTER)):
            if kind.endswith(suffix) and not external and target not in region_parts[region]:
                region_parts[region].append(target)

    region_blocks: dict[str, list[Block]] = {"header": [], "footer": []}
    for region, names in region_parts.items():
        for name in names:
            part = pkg.part(name)
            if part is not None:
                region_blocks[region].extend(reader.blocks(part.root, part, region))  # type: ignore[arg-type]

    blocks = tuple(region_blocks["header"] + body_blocks + region_blocks["footer"])
    if reader.skipped:
        log.info("skipped content in %s: %s", source_name or "document", dict(reader.skipped))
    return DocumentTree(
        blocks=blocks,
        media=dict(reader.media),
        source_name=source_name,
        skipped=dict(sorted(reader.skipped.items())),
    )
