"""Run manifests: stage parameters, seeds and content digests of files."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import zlib
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__

MANIFEST_FORMAT = "cascadescope.manifest"
SEED_ENV = "CASCADESCOPE_SEED"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def resolve_seed(cli_seed: int | None) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV}={env!r} is not an integer") from None


def stage_seed(root: int, stage: str) -> int:
    """Independent per-stage seed derived from the root seed and stage name."""
    ss = np.random.SeedSequence([root, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RunManifest:
    """JSON manifest next to the run outputs; wall-clock goes to a sidecar.

    Paths are stored relative to the manifest directory, so two runs in
    different directories produce byte-identical manifests.
    """

    def __init__(self, path: str | Path, data: dict | None = None):
        self.path = Path(path)
        self.data = data or {"format": MANIFEST_FORMAT, "tool": "cascadescope", "version": __version__, "stages": []}

    @property
    def timing_path(self) -> Path:
        return self.path.with_name(self.path.stem + ".timing.json")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        p = Path(path)
        if not p.exists():
            return cls(p)
        data = json.loads(p.read_text(encoding="utf-8"))
        if data.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"{p}: not a run manifest")
        return cls(p, data)

    @property
    def stages(self) -> list[dict]:
        return self.data["stages"]

    def stage(self, name: str) -> dict | None:
        for s in self.stages:
            if s["stage"] == name:
                return s
        return None

    def rel(self, p: str | Path) -> str:
        return Path(os.path.relpath(Path(p).resolve(), self.path.parent.resolve())).as_posix()

    def resolve(self, rel: str) -> Path:
        return self.path.parent / rel

    def _digests(self, paths: Iterable[str | Path]) -> dict[str, str]:
        return {self.rel(p): sha256_file(p) for p in sorted(paths, key=lambda q: self.rel(q))}

    def record(
        self,
        stage: str,
        params: dict[str, Any],
        seed: int | None,
        root_seed: int | None,
        inputs: Iterable[str | Path],
        outputs: Iterable[str | Path],
        seconds: float | None = None,
    ) -> dict:
        """Add (or replace) a stage entry and rewrite the manifest atomically."""
        entry = {
            "stage": stage,
            "params": params,
            "seed": seed,
            "inputs": self._digests(inputs),
            "outputs": self._digests(outputs),
        }
        if root_seed is not None:
            self.data["root_seed"] = root_seed
        for i, s in enumerate(self.stages):
            if s["stage"] == stage:
                self.stages[i] = entry
                break
        else:
            self.stages.append(entry)
        self.save()
        if seconds is not None:
            self._record_time(stage, seconds)
        return entry

    def save(self) -> None:
        atomic_write_text(self.path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def _record_time(self, stage: str, seconds: float) -> None:
        tp = self.timing_path
        timing = json.loads(tp.read_text(encoding="utf-8")) if tp.exists() else {}
        timing[stage] = round(seconds, 3)
        atomic_write_text(tp, json.dumps(timing, indent=2, sort_keys=True) + "\n")
