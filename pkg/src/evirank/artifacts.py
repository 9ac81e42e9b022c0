"""Atomic artifact writes with content-hash manifests for stale-input detection.

Every pipeline command writes its output through write_artifact, which
records a sidecar <name>.meta.json holding the producing stage, the sha256
of each input file consumed, and the sha256 of the output itself.  Before a
downstream command consumes an artifact, check_artifact walks the recorded
inputs (recursively through their own manifests) and aborts naming the stale
stage if anything changed since the artifact was built.  Manifests contain
no timestamps, so reruns are byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .errors import DataError

MANIFEST_SUFFIX = ".meta.json"
MANIFEST_VERSION = 1


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifact(path: str | Path, data: bytes, stage: str, inputs: dict[str, Path]) -> None:
    """Atomically write `data` and its manifest; `inputs` maps role -> source file."""
    path = Path(path)
    atomic_write_bytes(path, data)
    manifest = {
        "version": MANIFEST_VERSION,
        "stage": stage,
        "inputs": {
            role: {"path": str(p), "sha256": sha256_file(p)} for role, p in sorted(inputs.items())
        },
        "output_sha256": hashlib.sha256(data).hexdigest(),
    }
    atomic_write_bytes(
        manifest_path(path),
        (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8"),
    )


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + MANIFEST_SUFFIX)


def check_artifact(path: str | Path, _seen: set[str] | None = None) -> None:
    """Verify an artifact is fresh; no-op for plain files without a manifest."""
    path = Path(path)
    seen = _seen if _seen is not None else set()
    key = str(path.resolve())
    if key in seen:
        return
    seen.add(key)
    mpath = manifest_path(path)
    if not mpath.exists():
        return
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable manifest {mpath}: {exc}") from None
    stage = manifest.get("stage", "?")
    if not path.exists():
        raise DataError(f"artifact {path} (stage {stage}) is missing; rerun that stage")
    if sha256_file(path) != manifest.get("output_sha256"):
        raise DataError(
            f"artifact {path} was modified after stage {stage} produced it; rerun {stage}"
        )
    for role, rec in sorted(manifest.get("inputs", {}).items()):
        src = Path(rec["path"])
        if not src.exists():
            raise DataError(
                f"stale artifact {path}: input {role} ({src}) consumed by stage {stage} is gone"
            )
        if sha256_file(src) != rec["sha256"]:
            raise DataError(
                f"stale artifact {path}: input {role} ({src}) changed since stage {stage} "
                f"produced it; rerun {stage}"
            )
        check_artifact(src, seen)
