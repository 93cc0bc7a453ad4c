"""Parsing and validation of zenogas CSV artifacts.

Files start with `# zeno-csv v1 kind=<kind>` followed by a header row.
Numeric content is recomputed from the parsed columns; nothing is hard-coded.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
KNOWN_KINDS = ("rates_scan", "loss_curve", "band_family", "single_well",
               "acceptance")


class SchemaError(ValueError):
    pass


class Table:
    def __init__(self, kind: str, header: list[str], rows: list[list[str]],
                 path: str):
        self.kind = kind
        self.header = header
        self.rows = rows
        self.path = path

    def column(self, name: str) -> np.ndarray:
        """Numeric column; empty cells become NaN."""
        if name not in self.header:
            raise SchemaError(f"{self.path}: missing column {name!r}")
        i = self.header.index(name)
        out = np.empty(len(self.rows))
        for k, row in enumerate(self.rows):
            cell = row[i] if i < len(row) else ""
            out[k] = float(cell) if cell not in ("", "nan") else np.nan
        return out

    def text_column(self, name: str) -> list[str]:
        if name not in self.header:
            raise SchemaError(f"{self.path}: missing column {name!r}")
        i = self.header.index(name)
        return [row[i] if i < len(row) else "" for row in self.rows]


def load_table(path) -> Table:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input CSV {path} does not exist")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# zeno-csv v"):
        raise SchemaError(f"{path}: missing zeno-csv schema line")
    head = lines[0][2:].split()
    version = int(head[1][1:])
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema version {version}")
    kv = dict(item.split("=", 1) for item in head[2:] if "=" in item)
    kind = kv.get("kind", "")
    if kind not in KNOWN_KINDS:
        raise SchemaError(f"{path}: unknown kind {kind!r}")
    reader = csv.reader(lines[1:])
    header = next(reader)
    rows = [row for row in reader if row]
    return Table(kind, header, rows, str(path))


def expect_kind(table: Table, kind: str) -> Table:
    if table.kind != kind:
        raise SchemaError(
            f"{table.path}: expected kind {kind!r}, found {table.kind!r}")
    return table
