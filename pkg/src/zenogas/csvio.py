"""Versioned CSV emission and parsing.

Every file starts with a schema comment line `# zeno-csv v1 kind=<kind>`
followed by a header row; floats are written in shortest round-trip form so
reruns with identical configuration are byte-identical.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
KINDS = ("rates_scan", "loss_curve", "band_family", "single_well", "acceptance")


class SchemaError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, kind: str, header, rows) -> Path:
    if kind not in KINDS:
        raise SchemaError(f"unknown CSV kind {kind!r}")
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# zeno-csv v{SCHEMA_VERSION} kind={kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path):
    """Parse a zeno CSV; returns (kind, header, rows as string lists)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# zeno-csv v"):
        raise SchemaError(f"{path}: missing schema line")
    head = text[0][2:].split()
    version = int(head[1][1:])
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {version} unsupported")
    kv = dict(item.split("=", 1) for item in head[2:])
    kind = kv.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"{path}: unknown kind {kind!r}")
    reader = csv.reader(text[1:])
    header = next(reader)
    return kind, header, [row for row in reader if row]
