"""figkit --spec <path>: render figure specs (TOML) from zenogas CSVs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .plots import render
from .schema import SchemaError


def load_spec(path) -> list[dict]:
    """One spec file holds one or more [[figure]] tables."""
    raw = _toml.loads(Path(path).read_text(encoding="utf-8"))
    figures = raw.get("figure")
    if not figures:
        raise SchemaError(f"{path}: no [[figure]] tables found")
    if isinstance(figures, dict):
        figures = [figures]
    base = Path(path).parent
    out = []
    for fig in figures:
        fig = dict(fig)
        fig["inputs"] = [{"path": str(base / item["path"]),
                          **{k: v for k, v in item.items() if k != "path"}}
                         for item in fig.get("inputs", [])]
        if "output" in fig:
            fig["output"] = str(base / fig["output"])
        out.append(fig)
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="figkit",
                                description="render zenogas CSVs to figures")
    p.add_argument("--spec", required=True, help="TOML figure specification")
    args = p.parse_args(argv)
    try:
        figures = load_spec(args.spec)
        for fig in figures:
            out = render(fig)
            print(f"wrote {out}")
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
