"""Tests for the table PDF export."""

import math

import pandas as pd

from pdf_export import format_cell, generate_benchmark_pdf, get_pdf_filename, table_rows


def summary_frame():
    return pd.DataFrame([
        {"preset": "borehole", "dim": 8, "n_train": 32, "n_test": 5000, "replications": 10,
         "r2_kriging": 0.91, "r2_limit": 0.93, "r2_sink": 0.95, "ratio_limit": 0.8,
         "ratio_sink": 0.6, "extreme_ratio_limit": 0.7, "extreme_ratio_sink": 0.5, "nan_extreme": 0},
        {"preset": "friedman", "dim": 5, "n_train": 50, "n_test": 5000, "replications": 10,
         "r2_kriging": 0.88, "r2_limit": 0.87, "r2_sink": 0.89, "ratio_limit": 1.02,
         "ratio_sink": 0.97, "extreme_ratio_limit": math.nan, "extreme_ratio_sink": math.nan,
         "nan_extreme": 10},
    ])


def test_format_cell():
    assert format_cell(None) == "NaN"
    assert format_cell(math.nan) == "NaN"
    assert format_cell(0.12345) == "0.123"
    assert format_cell(2.0) == "2.000"
    assert format_cell(5000.0, count=True) == "5000"
    assert format_cell(7, count=True) == "7"


def test_rows_transpose_summary():
    rows = table_rows(summary_frame())
    assert rows[0] == ["Function", "borehole", "friedman"]
    labels = [r[0] for r in rows[1:]]
    assert "R² SiNK" in labels
    extreme = next(r for r in rows if r[0] == "Extreme EISE ratio (SiNK/Ordinary)")
    assert extreme[1:] == ["0.500", "NaN"]
    tests = next(r for r in rows if r[0] == "Test points")
    assert tests[1:] == ["5000", "5000"]


def test_pdf_bytes():
    pdf = generate_benchmark_pdf("3", summary_frame(), skipped=["robotarm"])
    assert pdf.startswith(b"%PDF")
    assert len(pdf) > 1000


def test_empty_summary():
    assert generate_benchmark_pdf("1", pd.DataFrame()).startswith(b"%PDF")


def test_filename():
    assert get_pdf_filename("1") == "table_1.pdf"
