"""Run manifest: config hash, input digests, seeds, stage timings, and
output inventory, updated atomically after every stage. Timings are
informational; manifest equality for determinism checks ignores them.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import __version__


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the target directory plus rename."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict[str, str]) -> str:
    canon = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class RunManifest:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {
                "tool_version": __version__,
                "config_hash": None,
                "seeds": {},
                "inputs": {},
                "outputs": {},
                "timings": {},
            }

    def set_config(self, config: dict[str, str]) -> None:
        self.data["config_hash"] = config_hash(config)

    def record_seed(self, name: str, seed: int) -> None:
        self.data["seeds"][name] = seed

    def record_input(self, path: str | Path) -> None:
        p = Path(path)
        self.data["inputs"][str(p)] = file_digest(p)

    def record_output(self, stage: str, path: str | Path) -> None:
        p = Path(path)
        self.data["outputs"].setdefault(stage, [])
        name = str(p)
        if name not in self.data["outputs"][stage]:
            self.data["outputs"][stage].append(name)

    def record_timing(self, stage: str, seconds: float) -> None:
        self.data["timings"][stage] = round(seconds, 6)

    def save(self) -> None:
        atomic_write_text(self.path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def comparable(self) -> dict:
        """Manifest content with the non-deterministic parts removed."""
        return {k: v for k, v in self.data.items() if k != "timings"}
