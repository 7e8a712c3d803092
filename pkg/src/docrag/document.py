"""In-memory document model shared by the readers and the partitioner."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Union

Region = Literal["body", "header", "footer"]
REGIONS: tuple[str, ...] = ("body", "header", "footer")


class Media(NamedTuple):
    data: bytes
    content_type: str


@dataclass(frozen=True)
class Run:
    """A formatted text span, or an anchored image (never both)."""

    text: str = ""
    font_size_pts: float | None = None
    bold: bool = False
    image_anchor: str | None = None
    alt_text: str = ""

    def __post_init__(self) -> None:
        if bool(self.text) == bool(self.image_anchor):
            raise ValueError("a run carries either text or an image anchor")

    @property
    def is_image(self) -> bool:
        return self.image_anchor is not None


@dataclass(frozen=True)
class ParagraphBlock:
    runs: tuple[Run, ...] = ()
    style_name: str | None = None
    outline_level: int | None = None
    list_marker: bool = False
    region: Region = "body"

    def __post_init__(self) -> None:
        if self.outline_level is not None and self.outline_level < 0:
            raise ValueError("outline_level must be >= 0")

    @property
    def text(self) -> str:
        return "".join(r.text for r in self.runs)


@dataclass(frozen=True)
class Cell:
    text: str = ""
    row_span: int = 1
    col_span: int = 1
    is_header: bool = False
    bold: bool = False

    def __post_init__(self) -> None:
        if self.row_span < 1 or self.col_span < 1:
            raise ValueError("cell spans must be >= 1")


@dataclass(frozen=True)
class TableBlock:
    """Rows hold only anchor cells; positions covered by a span are absent."""

    rows: tuple[tuple[Cell, ...], ...] = ()
    caption_hint: str | None = None
    region: Region = "body"


Block = Union[ParagraphBlock, TableBlock]


@dataclass(frozen=True)
class DocumentTree:
    blocks: tuple[Block, ...] = ()
    media: dict[str, Media] = field(default_factory=dict)
    source_name: str = ""
    # counts of content deliberately not captured, e.g. {"vector_drawings": 2}
    skipped: dict[str, int] = field(default_factory=dict)

    def body_blocks(self) -> list[Block]:
        return [b for b in self.blocks if b.region == "body"]


def occupancy(table: TableBlock) -> list[list[tuple[int, int] | None]]:
    """Expand spans into a grid of ``(row, cell)`` anchor coordinates.

    Unfilled positions are ``None``. Raises ``ValueError`` when a row span runs
    past the last row.
    """
    grid: list[list[tuple[int, int] | None]] = [[] for _ in table.rows]
    for r, row in enumerate(table.rows):
        col = 0
        for c, cell in enumerate(row):
            while col < len(grid[r]) and grid[r][col] is not None:
                col += 1
            for dr in range(cell.row_span):
                if r + dr >= len(grid):
                    raise ValueError(f"row span of cell ({r}, {c}) exceeds table height")
                target = grid[r + dr]
                while len(target) < col + cell.col_span:
                    target.append(None)
                for dc in range(cell.col_span):
                    if target[col + dc] is not None:
                        raise ValueError(f"cell ({r}, {c}) overlaps another span")
                    target[col + dc] = (r, c)
            col += cell.col_span
    return grid


def is_rectangular(table: TableBlock) -> bool:
    try:
        grid = occupancy(table)
    except ValueError:
        return False
    widths = {len(row) for row in grid}
    if len(widths) > 1:
        return False
    return all(pos is not None for row in grid for pos in row)
