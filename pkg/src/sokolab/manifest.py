"""Run manifests: every CLI command records its full configuration."""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def _hash_path(path: Path) -> str:
    if path.is_file():
        return hashlib.sha256(path.read_bytes()).hexdigest()
    if path.is_dir():
        h = hashlib.sha256()
        for f in sorted(path.rglob("*")):
            if f.is_file():
                h.update(f.name.encode())
                h.update(str(f.stat().st_size).encode())
        return h.hexdigest()
    return "missing"


def write_manifest(out_dir: str | Path, command: str, config: dict, seed: int,
                   inputs: dict[str, str] | None = None,
                   outputs: list[str] | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "code_version": __version__,
        "input_hashes": {name: _hash_path(Path(p)) for name, p in (inputs or {}).items()},
        "inputs": inputs or {},
        "outputs": outputs or [],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path
