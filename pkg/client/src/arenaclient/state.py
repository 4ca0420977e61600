"""Persistent-state directory helpers shared by the mechanisms.

Every artifact lands inside the assigned state dir; `confine` turns a
relative artifact path into an absolute one and refuses anything that
would escape, so a hostile match id cannot write outside the sandbox the
harness snapshots and rolls back.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]


def confine(state_dir: PathLike, *parts: str) -> Path:
    root = Path(state_dir).resolve()
    target = root.joinpath(*parts).resolve()
    if target != root and root not in target.parents:
        raise ValueError(f"artifact path escapes the state dir: {'/'.join(parts)!r}")
    return target


def slug(text: str) -> str:
    """Filesystem-safe token for ids that appear in artifact names."""
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "-", str(text)).strip("-.")
    return cleaned or "unnamed"


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_json(path: Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: Path, default=None):
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return default


def read_text(path: Path, default: str = "") -> str:
    try:
        return path.read_text()
    except OSError:
        return default


def append_line(path: Path, line: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as handle:
        handle.write(line + "\n")
