"""Small file-handling helpers: atomic writes and exact float JSON."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename).

    Readers never observe a partially written file; on failure the
    original file, if any, is left untouched.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_json(obj: Any, indent: int | None = 2) -> str:
    """Serialize to JSON with full float precision.

    Python's ``repr`` emits the shortest decimal string that round-trips
    to the same double, so floats survive save/load bit-exactly.
    """
    return json.dumps(obj, indent=indent, allow_nan=False)


def atomic_write_json(path: str, obj: Any, indent: int | None = 2) -> None:
    atomic_write_text(path, dump_json(obj, indent=indent) + "\n")
