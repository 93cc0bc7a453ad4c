"""Run manifests: resolved configuration, stage diagnostics, file checksums."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    scenario: str
    config: dict
    version: str = __version__
    started_at: float = field(default_factory=time.time)
    wall_seconds: float = 0.0
    diagnostics: list = field(default_factory=list)
    files: list = field(default_factory=list)
    error: str | None = None

    def add_file(self, path) -> None:
        p = Path(path)
        self.files.append({"path": p.name, "sha256": sha256_of(p),
                           "bytes": p.stat().st_size})

    def note(self, stage: str, **info) -> None:
        self.diagnostics.append({"stage": stage, **info})

    def finish(self) -> None:
        self.wall_seconds = time.time() - self.started_at

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        payload = {
            "scenario": self.scenario,
            "version": self.version,
            "config": self.config,
            "wall_seconds": self.wall_seconds,
            "diagnostics": self.diagnostics,
            "files": self.files,
            "error": self.error,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True),
                        encoding="utf-8")
        return path

    def verify(self, out_dir) -> bool:
        """Recompute checksums of every inventoried file."""
        base = Path(out_dir)
        return all(sha256_of(base / f["path"]) == f["sha256"]
                   for f in self.files)
