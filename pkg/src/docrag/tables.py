"""Flat-text and HTML renderings of :class:`TableBlock` grids."""

from __future__ import annotations

from html import escape

from .document import Cell, TableBlock


def _is_numeric(text: str) -> bool:
    chars = [c for c in text if not c.isspace()]
    return bool(chars) and sum(c.isdigit() for c in chars) / len(chars) > 0.5


def header_row_count(table: TableBlock) -> int:
    """Number of leading rows rendered inside ``<thead>``.

    Rows flagged as header in the source win. Without flags the first row is
    a header when all its cells are bold, or when the table has at least two
    rows and none of the first row's cells is mostly digits. The count then
    grows to swallow any row span that starts inside the header.
    """
    rows = table.rows
    count = 0
    for row in rows:
        if row and all(c.is_header for c in row):
            count += 1
        else:
            break
    if count == 0 and rows and rows[0]:
        first = [c for c in rows[0] if c.text]
        if first and all(c.bold for c in first):
            count = 1
        elif len(rows) >= 2 and first and not any(_is_numeric(c.text) for c in first):
            count = 1
    reach = count
    r = 0
    while r < reach:
        for cell in rows[r]:
            reach = max(reach, r + cell.row_span)
        r += 1
    return min(reach, len(rows))


def render_table_text(table: TableBlock) -> str:
    """Row-major text: non-empty cells joined by a space, rows by a newline.

    Spanned cells appear once, at their anchor. Empty cells and fully empty
    rows are left out so the flat form has no runs of blanks.
    """
    lines = []
    for row in table.rows:
        line = " ".join(c.text for c in row if c.text)
        if line:
            lines.append(line)
    return "\n".join(lines)


def _cell_html(cell: Cell, tag: str) -> str:
    attrs = ""
    if cell.col_span > 1:
        attrs += f' colspan="{cell.col_span}"'
    if cell.row_span > 1:
        attrs += f' rowspan="{cell.row_span}"'
    return f"<{tag}{attrs}>{escape(cell.text, quote=False)}</{tag}>"


def render_table_html(table: TableBlock, caption: str | None = None) -> str:
    heads = header_row_count(table)
    parts = ["<table>"]
    if heads:
        parts.append("<thead>")
        for row in table.rows[:heads]:
            parts.append("<tr>" + "".join(_cell_html(c, "th") for c in row) + "</tr>")
        parts.append("</thead>")
    parts.append("<tbody>")
    for row in table.rows[heads:]:
        parts.append("<tr>" + "".join(_cell_html(c, "td") for c in row) + "</tr>")
    parts.append("</tbody></table>")
    html = "".join(parts)
    if caption:
        return f"<pre>\n{escape(caption, quote=False)}\n{html}\n</pre>"
    return html
