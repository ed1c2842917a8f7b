"""Run manifests: enough to reproduce any CLI invocation bit-exactly."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from . import __version__


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    seed: int | None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    tool: str = "scenecoder"
    version: str = __version__
    wall_clock_s: float = 0.0

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return RunManifest(**doc)


def run_from_manifest(path: str) -> int:
    """Re-execute the recorded command line; outputs are reproduced
    byte-identically (the new manifest differs only in wall clock)."""
    from .cli import main

    manifest = load_manifest(path)
    return main(manifest.argv)


class Timer:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self._t0
