import io
import struct
import zipfile
import zlib
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings, strategies as st

from docrag.document import ParagraphBlock, TableBlock, is_rectangular, occupancy
from docrag.docx_reader import open_docx
from docrag.errors import MalformedXml, MissingDocumentPart, NotZip

from docx_factory import W, DocxBuilder, fake_png


def paragraphs(tree):
    return [b for b in tree.blocks if isinstance(b, ParagraphBlock)]


def test_single_paragraph():
    tree = open_docx(DocxBuilder().paragraph("Hello").build(), "hello.docx")
    assert len(tree.blocks) == 1
    (para,) = tree.blocks
    assert [r.text for r in para.runs] == ["Hello"]
    assert tree.source_name == "hello.docx"


def test_many_paragraphs_keep_order():
    # a long Chinese manual, one paragraph per page
    title = "污水处理设备操作维护问答"
    b = DocxBuilder()
    for page in range(1, 370):
        b.paragraph(f"{title} 第{page}页")
    tree = open_docx(b.build())
    texts = [p.text for p in paragraphs(tree)]
    assert len(texts) == 369
    assert texts == [f"{title} 第{page}页" for page in range(1, 370)]


def test_style_resolution_and_sizes():
    b = DocxBuilder(default_size=11)
    b.heading("Overview", 1)
    b.heading("Detail", 2)
    b.paragraph("body text")
    b.paragraph("big text", size=14)
    b.paragraph("caption", style="Caption")
    b.paragraph([("strong", {"style": "Strong"}), (" plain", {"bold": False})])
    tree = open_docx(b.build())
    h1, h2, body, big, cap, mixed = paragraphs(tree)
    assert (h1.outline_level, h1.runs[0].font_size_pts, h1.runs[0].bold) == (0, 16.0, True)
    # basedOn chain: Heading2 inherits bold from Heading1 and overrides the size
    assert (h2.outline_level, h2.runs[0].font_size_pts, h2.runs[0].bold) == (1, 14.0, True)
    assert h1.style_name == "heading 1"
    assert (body.outline_level, body.runs[0].font_size_pts, body.runs[0].bold) == (None, 11.0, False)
    assert big.runs[0].font_size_pts == 14.0
    assert cap.runs[0].font_size_pts == 9.0
    assert [(r.text, r.bold) for r in mixed.runs] == [("strong", True), (" plain", False)]


def test_unknown_size_without_styles():
    tree = open_docx(DocxBuilder(with_styles=False).paragraph("x").build())
    assert tree.blocks[0].runs[0].font_size_pts is None


def test_list_marker():
    b = DocxBuilder().paragraph("item", numbered=True).paragraph("styled item", style="ListBullet")
    b.paragraph("plain")
    a, s, p = paragraphs(open_docx(b.build()))
    assert a.list_marker and s.list_marker and not p.list_marker


def test_tabs_and_breaks():
    tree = open_docx(DocxBuilder().paragraph("a\tb\nc").build())
    assert tree.blocks[0].text == "a\tb\nc"


def test_images_and_skip_report():
    b = DocxBuilder()
    png = fake_png("one")
    b.paragraph("before", extra_runs=b.image_run_xml(png, alt="a diagram"))
    b.vector_shape()
    b.image(b"emfdata", ext="emf")
    tree = open_docx(b.build())
    (para,) = paragraphs(tree)
    text_run, image_run = para.runs
    assert text_run.text == "before"
    assert image_run.is_image and image_run.alt_text == "a diagram"
    assert tree.media[image_run.image_anchor].data == png
    assert tree.media[image_run.image_anchor].content_type == "image/png"
    assert sum(tree.skipped.values()) == 2


def test_tracked_changes():
    xml = (f'<w:p><w:r><w:t>kept </w:t></w:r><w:ins><w:r><w:t>inserted</w:t></w:r></w:ins>'
           f'<w:del><w:r><w:delText>deleted</w:delText></w:r></w:del></w:p>')
    tree = open_docx(DocxBuilder().raw(xml).build())
    assert tree.blocks[0].text == "kept inserted"


def test_table_spans_rectangular():
    b = DocxBuilder()
    b.table([[{"text": "hdr", "span": 2}], ["a", "b"]])
    b.table([[{"text": "x", "vmerge": "restart"}, "1"], [{"vmerge": "continue"}, "2"], ["y", "3"]])
    t1, t2 = [blk for blk in open_docx(b.build()).blocks if isinstance(blk, TableBlock)]
    assert [[c.text for c in row] for row in t1.rows] == [["hdr"], ["a", "b"]]
    assert t1.rows[0][0].col_span == 2
    assert t2.rows[0][0].row_span == 2 and [c.text for c in t2.rows[1]] == ["2"]
    for t in (t1, t2):
        assert is_rectangular(t)


def test_header_rows_flagged():
    b = DocxBuilder().table([["h1", "h2"], ["1", "2"]], header_rows=1)
    (table,) = open_docx(b.build()).blocks
    assert [c.is_header for c in table.rows[0]] == [True, True]
    assert [c.is_header for c in table.rows[1]] == [False, False]


def test_table_caption_hint():
    (table,) = open_docx(DocxBuilder().table([["a"]], caption="Table 4 Flows").build()).blocks
    assert table.caption_hint == "Table 4 Flows"


def test_headers_and_footers_are_region_tagged():
    b = DocxBuilder().paragraph("section one")
    b.end_section(headers=[("default", "H1")], footers=[("default", "F1")])
    b.paragraph("section two")
    tree = open_docx(b.build(headers=[("default", "H2")], footers=[("default", "F2")]))
    regions = [(blk.region, blk.text) for blk in tree.blocks]
    body = [t for r, t in regions if r == "body"]
    assert body == ["section one", "section two"]
    assert sorted(t for r, t in regions if r == "header") == ["H1", "H2"]
    assert sorted(t for r, t in regions if r == "footer") == ["F1", "F2"]
    # header/footer blocks are never interleaved into the body run
    kinds = [r for r, _ in regions]
    first, last = kinds.index("body"), len(kinds) - 1 - kinds[::-1].index("body")
    assert all(k == "body" for k in kinds[first : last + 1])


def test_not_zip():
    with pytest.raises(NotZip):
        open_docx(b"plain bytes")


def test_missing_document_part():
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("other.xml", "<x/>")
    with pytest.raises(MissingDocumentPart):
        open_docx(buf.getvalue())


def test_malformed_xml_reports_position():
    data = DocxBuilder().paragraph("ok").build()
    src = zipfile.ZipFile(io.BytesIO(data))
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for info in src.infolist():
            body = src.read(info)
            if info.filename == "word/document.xml":
                body = body.replace(b"</w:body>", b"<w:p></w:body>")
            zf.writestr(info, body)
    with pytest.raises(MalformedXml) as err:
        open_docx(buf.getvalue())
    assert err.value.part == "word/document.xml"
    assert err.value.position is not None


def test_deterministic():
    data = DocxBuilder().heading("T").paragraph("x").table([["a", "b"]]).build()
    assert open_docx(data) == open_docx(data)


# order preservation against an independent walk of the raw XML


def naive_walk(data: bytes) -> list[str]:
    """Top-level body paragraph texts in document order, straight from the XML."""
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        root = ET.fromstring(zf.read("word/document.xml"))
    out = []
    for child in root.find(f"{{{W}}}body"):
        if child.tag != f"{{{W}}}p":
            continue
        parts = []
        for el in child.iter():
            if el.tag == f"{{{W}}}t":
                parts.append(el.text or "")
            elif el.tag == f"{{{W}}}tab":
                parts.append("\t")
            elif el.tag == f"{{{W}}}br":
                parts.append("\n")
        text = "".join(parts)
        if text.strip():
            out.append(text)
    return out


texts = st.text(alphabet=st.sampled_from("abcXYZ 汉字。,.\t\n"), min_size=1, max_size=30)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(texts, st.sampled_from([None, "Heading1", "Caption"]), st.booleans()), max_size=15))
def test_order_matches_naive_walk(items):
    b = DocxBuilder()
    for text, style, as_table in items:
        if as_table:
            b.table([[text.replace("\n", " "), "cell"]])
        else:
            b.paragraph(text, style=style)
    data = b.build()
    tree = open_docx(data)
    assert [blk.text for blk in paragraphs(tree)] == naive_walk(data)


# interoperability with documents produced by python-docx


def tiny_png() -> bytes:
    def chunk(kind: bytes, body: bytes) -> bytes:
        return struct.pack(">I", len(body)) + kind + body + struct.pack(">I", zlib.crc32(kind + body))

    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    idat = zlib.compress(b"\x00\xff\x00\x00")
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


def test_python_docx_document():
    docx = pytest.importorskip("docx")
    doc = docx.Document()
    doc.sections[0].header.paragraphs[0].text = "running header"
    doc.add_heading("Plant overview", level=1)
    p = doc.add_paragraph("Normal text with ")
    p.add_run("bold").bold = True
    doc.add_paragraph("first bullet", style="List Bullet")
    table = doc.add_table(rows=2, cols=3)
    merged = table.cell(0, 0).merge(table.cell(0, 1))
    merged.text = "wide"
    table.cell(0, 2).text = "c"
    for i, cell in enumerate(table.rows[1].cells):
        cell.text = str(i)
    doc.add_picture(io.BytesIO(tiny_png()))
    buf = io.BytesIO()
    doc.save(buf)

    tree = open_docx(buf.getvalue(), "pydocx.docx")
    body = [b for b in tree.blocks if b.region == "body"]
    heading, para, bullet, tbl, pic = body
    assert heading.text == "Plant overview" and heading.outline_level == 0
    assert [(r.text, r.bold) for r in para.runs] == [("Normal text with ", False), ("bold", True)]
    assert bullet.list_marker
    assert [[c.text for c in row] for row in tbl.rows] == [["wide", "c"], ["0", "1", "2"]]
    assert tbl.rows[0][0].col_span == 2 and is_rectangular(tbl)
    assert pic.runs[0].is_image and tree.media[pic.runs[0].image_anchor].data == tiny_png()
    assert [b.text for b in tree.blocks if b.region == "header"] == ["running header"]


def test_rectangle_check():
    from docrag.document import Cell

    ragged = TableBlock(rows=((Cell("a", row_span=2), Cell("b")), (Cell("c"), Cell("d"))))
    assert not is_rectangular(ragged)
    with pytest.raises(ValueError):
        occupancy(TableBlock(rows=((Cell("a", row_span=3),), (Cell("b"),))))
    assert is_rectangular(TableBlock(rows=((Cell("a", row_span=2), Cell("b")), (Cell("c"),))))


def test_span_grid_matches_raw_xml():
    b = DocxBuilder().table([[{"text": "hdr", "span": 2}], ["a", "b"]])
    data = b.build()
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        root = ET.fromstring(zf.read("word/document.xml"))
    widths = []
    for tr in root.iter(f"{{{W}}}tr"):
        width = 0
        for tc in tr.findall(f"{{{W}}}tc"):
            span = tc.find(f"{{{W}}}tcPr/{{{W}}}gridSpan")
            width += int(span.get(f"{{{W}}}val")) if span is not None else 1
        widths.append(width)
    (table,) = open_docx(data).blocks
    assert widths == [len(row) for row in occupancy(table)] == [2, 2]
