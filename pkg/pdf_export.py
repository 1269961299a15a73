"""
PDF Export Module for benchmark tables
Renders the per-preset summary of a results table as a one-page report
"""

import io
import logging
import math
from typing import Any, List, Optional

import pandas as pd
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
from reportlab.lib.units import cm
from reportlab.platypus import (
    SimpleDocTemplate, Paragraph, Spacer, Table, TableStyle, HRFlowable
)

logger = logging.getLogger(__name__)

TABLE_TITLES = {
    "1": "Gaussian process and piston function",
    "3": "Ordinary Kriging, Limit Kriging and SiNK on test functions",
}

ROW_LABELS = [
    ("dim", "Dimension"),
    ("n_train", "Training points"),
    ("n_test", "Test points"),
    ("replications", "Replications"),
    ("r2_kriging", "R² Ordinary Kriging"),
    ("r2_limit", "R² Limit Kriging"),
    ("r2_sink", "R² SiNK"),
    ("ratio_limit", "Overall EISE ratio (Limit/Ordinary)"),
    ("ratio_sink", "Overall EISE ratio (SiNK/Ordinary)"),
    ("extreme_ratio_limit", "Extreme EISE ratio (Limit/Ordinary)"),
    ("extreme_ratio_sink", "Extreme EISE ratio (SiNK/Ordinary)"),
    ("nan_extreme", "Replications without extremes"),
]


COUNT_ROWS = {"dim", "n_train", "n_test", "replications", "nan_extreme"}


def format_cell(value: Any, count: bool = False) -> str:
    """Three decimals for ratios and R^2, whole numbers for count rows, NaN spelled out"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NaN"
    if count:
        return str(int(value))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return f"{value:.3f}"
    return str(value)


def table_rows(summary: pd.DataFrame) -> List[List[str]]:
    """Transpose the summary so each preset is a column, as in the printed tables"""
    header = ["Function"] + [str(f) for f in summary["preset"]]
    rows = [header]
    for key, label in ROW_LABELS:
        if key in summary:
            rows.append([label] + [format_cell(v, key in COUNT_ROWS) for v in summary[key].tolist()])
    return rows


def generate_benchmark_pdf(which: str, summary: pd.DataFrame,
                           skipped: Optional[List[str]] = None) -> bytes:
    """
    Generate a PDF with one results table

    Args:
        which: table id ('1' or '3')
        summary: one row per preset, as built by bench.summary_row
        skipped: presets left out of the run

    Returns:
        PDF file as bytes
    """
    buffer = io.BytesIO()
    doc = SimpleDocTemplate(
        buffer,
        pagesize=landscape(A4),
        rightMargin=1*cm,
        leftMargin=1*cm,
        topMargin=1.5*cm,
        bottomMargin=1.5*cm
    )

    styles = getSampleStyleSheet()

    title_style = ParagraphStyle(
        'BenchTitle',
        parent=styles['Heading1'],
        fontSize=20,
        spaceAfter=12,
        alignment=TA_CENTER,
        textColor=colors.HexColor('#1a365d')
    )

    body_style = ParagraphStyle(
        'BenchBody',
        parent=styles['Normal'],
        fontSize=9,
        spaceAfter=6,
        leading=12
    )

    story = []
    story.append(Paragraph(f"Table {which}: {TABLE_TITLES.get(str(which), 'Benchmark results')}", title_style))
    story.append(HRFlowable(width="100%", thickness=2, color=colors.HexColor('#3182ce')))
    story.append(Spacer(1, 10))
    story.append(Paragraph(
        "Values are medians over replications. Extreme values are test points with "
        "|z-score| above the threshold under the fitted mean and variance.",
        body_style
    ))
    story.append(Spacer(1, 10))

    if summary.empty:
        story.append(Paragraph("No preset produced results.", body_style))
    else:
        rows = table_rows(summary)
        first_width = 7*cm
        other = max((landscape(A4)[0] - 2*cm - first_width) / max(len(rows[0]) - 1, 1), 2*cm)
        table = Table(rows, colWidths=[first_width] + [other] * (len(rows[0]) - 1))
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#3182ce')),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.white),
            ('ALIGN', (1, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
            ('BACKGROUND', (0, 1), (-1, -1), colors.HexColor('#f7fafc')),
            ('GRID', (0, 0), (-1, -1), 1, colors.HexColor('#e2e8f0'))
        ]))
        story.append(table)

    story.append(Spacer(1, 16))
    if skipped:
        story.append(Paragraph(f"Skipped (slow tier): {', '.join(skipped)}", body_style))

    footnote_style = ParagraphStyle(
        'Footnote',
        parent=styles['Normal'],
        fontSize=8,
        textColor=colors.HexColor('#718096'),
        alignment=TA_CENTER
    )
    story.append(HRFlowable(width="100%", thickness=1, color=colors.HexColor('#cbd5e0')))
    story.append(Spacer(1, 6))
    story.append(Paragraph(
        "NaN marks ratios with no extreme test values in any replication.",
        footnote_style
    ))

    doc.build(story)

    pdf_bytes = buffer.getvalue()
    buffer.close()
    logger.debug("Rendered table %s PDF (%d bytes)", which, len(pdf_bytes))
    return pdf_bytes


def get_pdf_filename(which: str) -> str:
    """File name for a table PDF"""
    return f"table_{which}.pdf"
