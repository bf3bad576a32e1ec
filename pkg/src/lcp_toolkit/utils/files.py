"""Atomic file writes and content digests."""

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Union

from .errors import DataError


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> Path:
    """
    Write to a temporary file in the target directory, then rename over `path`.

    Raises:
        DataError: If the directory cannot be created or written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise DataError(f"cannot write file: {e.strerror or e}", path=str(path))
    return path


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
