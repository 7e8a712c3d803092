"""Shared fixtures: the three reference tables and a bilingual sample document."""

from __future__ import annotations

from docrag.document import Cell, TableBlock

from docx_factory import DocxBuilder, fake_png


def _row(*texts: str, header: bool = False) -> tuple[Cell, ...]:
    return tuple(Cell(t, is_header=header) for t in texts)


WASTEWATER_CAPTION = "Table 1 Wastewater characteristics."
WASTEWATER = TableBlock(
    rows=(
        (
            Cell("Parameter (mg L⁻¹)", is_header=True),
            Cell("Designed influent", is_header=True),
            Cell("Actual influent", is_header=True),
            Cell("Effluent requirements", col_span=2, is_header=True),
        ),
        _row("", "", "", "Startup phase (and before upgrade)", "Stable phase", header=True),
        _row("COD", "300", "211.6 ± 48.2", "50", "40"),
        _row("NH₄⁺-N", "50", "48.5 ± 13.1", "5 (8)", "2 (3.5)"),
        _row("TN", "70", "58.4 ± 13.9", "15", "15"),
        _row("TP", "4", "5.8 ± 2.3", "0.5", "0.4"),
    ),
)

RECYCLATES_CAPTION = (
    "Table 9. Total recyclates production for the sector-specific material flow analysis "
    "[expressed as megatonnes] resulting from the sensitivity alternative cases, compared to the "
    "results of the 'Base Scenario' sector-specific material flow analysis (calculated as a percentage "
    "variation). A description of the rationale for each sensitivity scenario is described in Section "
    "2.3.4. (Note: E = Electrical and Electronic Equipment (EEE))."
)
RECYCLATES_ROWS = [
    ("1", "All manufactured products are consumed", "5.88", "+32%"),
    ("2", "Only finished products are sold to end-consumers", "3.72", "-17%"),
    ("3", "Reduced stock variation", "6.00", "+35%"),
    ("4", "Absence of waste trade", "4.71", "+6%"),
    ("5", "Absence of mixed waste collection", "9.15", "+105%"),
    ("6", "Absence of mismanaged waste", "5.08", "+14%"),
    ("7", "Absence of mismanaged waste being recollected and recycled", "3.99", "-11%"),
    ("8", "Revised mismanaged waste assumptions (mismanaged waste only occurs for the transport and "
          "EEE sectors and it's not recollected for recycling)", "4.04", "-10%"),
    ("9", "Improved recycling performance", "6.68", "+50%"),
]
RECYCLATES = TableBlock(
    rows=(
        _row("Identifier", "Sensitivity alternative case name",
             "Recyclates produced (and consumed in EU27) [Mt]",
             "Percentage variation with respect to the base MFA [%]", header=True),
        *(_row(*r) for r in RECYCLATES_ROWS),
    ),
)

SEWER_CAPTION = "表1 CCTV、QV和声呐的适用性与优缺点"
SEWER_CAPTION_EN = "Tab.1 Applicability, advantages and disadvantages of CCTV, QV and Sonar"
SEWER = TableBlock(
    rows=(
        _row("检测仪器", "适用条件", "优点", "缺点", header=True),
        _row("CCTV", "管道内水位不大于管道直径的20%", "摄像头可随管道机器人进入管道内部,真实反映内部情况",
             "使用前需进行封堵、清淤、降水工作"),
        _row("QV", "管道内水位不宜大于管径的1/2,管段长度不宜大于50m",
             "通过摄像头可真实反映管道内部情况;设备便携,与CCTV相比更加简便",
             "检测前需要排除管内积水;只能在管口进行检测,检测距离短"),
        _row("声呐", "管道内水深深大于300mm", "使用前无需排空积水,适于高水位地区检测",
             "仅可以辅助性判断缺陷,管内积水较少时不适用"),
    ),
)

REFERENCE_TABLES = {
    "wastewater": (WASTEWATER, WASTEWATER_CAPTION),
    "recyclates": (RECYCLATES, RECYCLATES_CAPTION),
    "sewer": (SEWER, SEWER_CAPTION),
}

SBR_CAPTION = "图 3-1 SBR 的基本运行操作过程"
AERATION_CAPTION = "Figure 2 Layout of the aeration tank and blower room"
HEADER_MARK = "HDRMARK 内部资料 internal use"
FOOTER_MARK = "FTRMARK 第 1 页 page footer"


def _cells(table: TableBlock) -> list[list]:
    """Docx-builder cell specs for a table whose spans are column spans only."""
    return [[{"text": c.text, "span": c.col_span} for c in row] for row in table.rows]


def bilingual_document() -> bytes:
    """A Chinese/English manual: 12 titled sections, 2 tables, 2 captioned images, header and footer."""
    b = DocxBuilder(default_size=11)
    b.paragraph("本手册介绍污水处理设备的操作与维护。This manual covers plant operation.")
    b.heading("1 Introduction")
    b.paragraph("The treatment plant serves a town of forty thousand people and runs a sequencing batch "
                "reactor line.")
    b.paragraph(["The operators log influent flow every ", "hour and", "\nsample the effluent twice a day."])
    b.heading("2 污水处理工艺")
    b.paragraph("污水处理工艺包括预处理、生物处理和深度处理三个阶段。")
    b.heading("2.1 SBR 工艺", 2)
    b.paragraph("SBR 反应池按进水、曝气、沉淀、排水和闲置五个阶段循环运行。")
    b.image(fake_png("sbr-process"), alt="SBR cycle diagram")
    b.paragraph(SBR_CAPTION, style="Caption")
    b.heading("2.2 Influent quality", 2)
    b.paragraph(WASTEWATER_CAPTION, style="Caption")
    b.table(_cells(WASTEWATER), header_rows=2)
    b.paragraph("Values are monthly averages over the first operating year.")
    b.heading("3 管道检测")
    b.paragraph("管道检测常用的仪器有 CCTV、QV 和声呐。")
    b.paragraph(SEWER_CAPTION, style="Caption")
    b.table(_cells(SEWER), header_rows=1)
    b.heading("4 Aeration")
    b.paragraph("Blowers deliver air to fine-bubble diffusers on the tank floor.")
    b.image(fake_png("aeration-layout"), alt="")
    b.paragraph(AERATION_CAPTION, style="Caption")
    b.heading("5 设备维护")
    b.paragraph("• 每周检查水泵密封。", style="ListBullet")
    b.paragraph("• 每月校准溶解氧仪。", style="ListBullet")
    b.heading("6 Safety")
    b.paragraph("Never enter a confined space without a gas detector and a standby attendant.")
    b.heading("7 Sludge handling")
    b.paragraph("Excess sludge is thickened, dewatered and hauled off site.")
    b.heading("8 运行记录")
    b.paragraph("运行记录应至少保存三年。")
    b.heading("9 Troubleshooting")
    b.paragraph("Rising sludge usually points to denitrification in the clarifier.")
    b.heading("10 结论")
    b.paragraph("规范操作可以延长设备寿命。")
    return b.build(headers=[("default", HEADER_MARK)], footers=[("default", FOOTER_MARK)])
