"""Deterministic CSV writing shared by the exporters."""

from __future__ import annotations

import csv
import io
import numbers
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Round-trip float formatting; ints and strings pass through."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (numbers.Integral, str)):
        return str(value)
    return format(float(value), ".17g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    text = csv_text(header, rows)
    path.write_text(text, encoding="utf-8", newline="")
    return path
