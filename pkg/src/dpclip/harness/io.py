"""Deterministic CSV emission: fixed headers, repr-formatted floats, '\\n' rows."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def format_value(value) -> str:
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """Write rows under a fixed header; identical inputs give identical bytes."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
