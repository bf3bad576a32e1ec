"""Append-only run manifests (one JSON record per line)."""

import json
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import torch

from . import __version__
from .utils.errors import DataError
from .utils.files import file_digest
from .utils.validation import validate_file_exists

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManifest:
    """
    Provenance log of one run directory.

    Records are only ever appended: a "start" record with the merged config,
    seed and input digests (written before any training), then "epoch",
    "artifact" and "finish" records.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)

    def _append(self, record: Mapping[str, Any]) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, sort_keys=True, default=str) + "\n")
        except OSError as e:
            raise DataError(f"cannot append to manifest: {e.strerror or e}", str(self.path))

    @classmethod
    def start(
        cls,
        run_dir: Union[str, Path],
        command: str,
        config: Mapping[str, Any],
        seed: int,
        inputs: Mapping[str, Optional[str]],
    ) -> "RunManifest":
        """
        Open (or extend) the manifest of `run_dir` and record the run inputs.

        Raises:
            NotFoundError: If an input file is missing
        """
        digests = {
            name: {"path": str(path), "sha256": file_digest(validate_file_exists(path, name))}
            for name, path in inputs.items()
            if path is not None
        }
        manifest = cls(Path(run_dir) / MANIFEST_NAME)
        manifest._append(
            {
                "event": "start",
                "time": _now(),
                "command": command,
                "config": dict(config),
                "seed": seed,
                "inputs": digests,
                "toolkit_version": __version__,
                "torch_version": torch.__version__,
                "python_version": platform.python_version(),
            }
        )
        return manifest

    def log_epochs(self, records: Iterable[Mapping[str, Any]]) -> None:
        for record in records:
            self._append({"event": "epoch", **record})

    def add_artifact(self, kind: str, path: Union[str, Path]) -> None:
        """Record a produced file (or directory of files) with its digest."""
        path = Path(path)
        files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
        self._append(
            {
                "event": "artifact",
                "kind": kind,
                "path": str(path),
                "files": {str(p): file_digest(p) for p in files},
            }
        )

    def finish(self, summary: Mapping[str, Any]) -> None:
        self._append({"event": "finish", "time": _now(), **summary})


def read_manifest(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """All records of a manifest file, oldest first."""
    path = validate_file_exists(path, "Manifest")
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(f"invalid manifest record: {e}", str(path), line_number)
    return records
