"""Report generation: JSON documents, text tables, SVG charts and PDF."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from ..version import APP_NAME, __version__
from . import plots

logger = logging.getLogger(__name__)

FigureFactory = Callable[[], object]


@dataclass
class ReportSection:
    """A titled table; the first row is the header."""
    title: str
    rows: List[List[str]]
    note: Optional[str] = None


@dataclass
class Report:
    """Everything one command wants to export."""
    name: str
    title: str
    payload: Dict
    text: str
    sections: List[ReportSection] = field(default_factory=list)
    charts: Dict[str, FigureFactory] = field(default_factory=dict)


def dumps(payload: Dict) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class ReportGenerator:
    """Write reports to a directory.

    JSON and text files are always written; SVG charts unless disabled; a PDF
    assembled from the same tables and charts when ``include_pdf`` is set.
    """

    def __init__(self, include_charts: bool = True, include_pdf: bool = False):
        self.include_charts = include_charts
        self.include_pdf = include_pdf

    def export(self, out_dir: Path, report: Report) -> List[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        json_path = out_dir / f"{report.name}.json"
        json_path.write_text(dumps(report.payload), encoding="utf-8")
        written.append(json_path)

        text_path = out_dir / f"{report.name}.txt"
        text_path.write_text(report.text.rstrip("\n") + "\n", encoding="utf-8")
        written.append(text_path)

        if self.include_charts:
            for chart_name, factory in report.charts.items():
                written.append(plots.save_svg(factory(), out_dir / f"{report.name}_{chart_name}.svg"))

        if self.include_pdf:
            written.append(self.export_pdf(out_dir / f"{report.name}.pdf", report))

        logger.info(f"Wrote {len(written)} report file(s) to {out_dir}")
        return written

    def export_pdf(self, filepath: Path, report: Report) -> Path:
        """Export the report's tables and charts to a PDF file."""
        from reportlab.lib import colors
        from reportlab.lib.enums import TA_CENTER
        from reportlab.lib.pagesizes import A4
        from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
        from reportlab.lib.units import mm
        from reportlab.platypus import (
            Image,
            KeepTogether,
            PageBreak,
            Paragraph,
            SimpleDocTemplate,
            Spacer,
            Table,
            TableStyle,
        )

        doc = SimpleDocTemplate(
            str(filepath),
            pagesize=A4,
            rightMargin=20 * mm,
            leftMargin=20 * mm,
            topMargin=20 * mm,
            bottomMargin=20 * mm,
        )
        styles = getSampleStyleSheet()
        title_style = ParagraphStyle(
            name="ReportTitle",
            parent=styles["Heading1"],
            fontSize=22,
            spaceAfter=20,
            textColor=colors.HexColor("#1a1a2e"),
            alignment=TA_CENTER,
        )
        section_style = ParagraphStyle(
            name="SectionTitle",
            parent=styles["Heading2"],
            fontSize=14,
            spaceBefore=20,
            spaceAfter=10,
            textColor=colors.HexColor("#58a6ff"),
        )
        note_style = ParagraphStyle(
            name="Note",
            parent=styles["Normal"],
            fontSize=9,
            textColor=colors.HexColor("#8b949e"),
        )

        story = [Paragraph(report.title, title_style), Spacer(1, 10)]
        meta = Table(
            [["Generated:", datetime.now().strftime("%Y-%m-%d %H:%M:%S")],
             ["Tool:", f"{APP_NAME} {__version__}"]],
            colWidths=[100, 200],
        )
        meta.setStyle(TableStyle([
            ("FONTNAME", (0, 0), (-1, -1), "Helvetica"),
            ("FONTSIZE", (0, 0), (-1, -1), 10),
            ("TEXTCOLOR", (0, 0), (0, -1), colors.HexColor("#8b949e")),
            ("ALIGN", (0, 0), (0, -1), "RIGHT"),
            ("BOTTOMPADDING", (0, 0), (-1, -1), 6),
        ]))
        story += [meta, Spacer(1, 20)]

        for section in report.sections:
            table = Table(section.rows)
            table.setStyle(TableStyle([
                ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#58a6ff")),
                ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
                ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
                ("FONTNAME", (0, 1), (-1, -1), "Helvetica"),
                ("FONTSIZE", (0, 0), (-1, -1), 9),
                ("ALIGN", (1, 0), (-1, -1), "CENTER"),
                ("GRID", (0, 0), (-1, -1), 0.5, colors.HexColor("#30363d")),
                ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.HexColor("#f6f8fa")]),
                ("TOPPADDING", (0, 0), (-1, -1), 6),
                ("BOTTOMPADDING", (0, 0), (-1, -1), 6),
            ]))
            block = [Paragraph(section.title, section_style), table]
            if section.note:
                block += [Spacer(1, 4), Paragraph(section.note, note_style)]
            story.append(KeepTogether(block + [Spacer(1, 12)]))

        if report.charts:
            story += [PageBreak(), Paragraph("Charts", section_style), Spacer(1, 10)]
            for factory in report.charts.values():
                story += [Image(plots.png_buffer(factory()), width=170 * mm, height=70 * mm), Spacer(1, 10)]

        doc.build(story)
        return Path(filepath)


def table_rows(header: Sequence[str], rows: Sequence[Sequence[object]]) -> List[List[str]]:
    """Header plus stringified rows; floats get two decimals, None becomes '-'."""
    def cell(value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.2f}"
        return str(value)

    return [list(header)] + [[cell(v) for v in row] for row in rows]
