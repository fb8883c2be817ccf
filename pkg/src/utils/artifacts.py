"""Run artifacts: output directories, input discovery, hashes and manifests.

Manifests hold only deterministic fields so reruns with the same inputs,
configuration and seed write byte-identical files; wall-clock timings go to
a separate ``timings.json``.
"""

import glob
import hashlib
import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from exceptions import MissingInputError, UnreadableSourceError
from models import InputFile, RunManifest

__all__ = [
    "LOG_SUFFIXES",
    "MANIFEST_FILE",
    "TIMINGS_FILE",
    "ensure_out_dir",
    "resolve_inputs",
    "sha256_file",
    "hash_inputs",
    "write_json",
    "write_manifest",
]

logger = logging.getLogger(__name__)

LOG_SUFFIXES: tuple[str, ...] = (".jsonl", ".csv")
MANIFEST_FILE = "manifest.json"
TIMINGS_FILE = "timings.json"

_CHUNK = 1 << 20


def ensure_out_dir(path: Path) -> Path:
    """
    Create the output directory if needed.

    Raises:
        UnreadableSourceError: If the directory cannot be created.
    """
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UnreadableSourceError(f"Cannot create output directory {path}: {e}", path=str(path)) from e
    return path


def resolve_inputs(pattern: str | Path, suffixes: tuple[str, ...] = LOG_SUFFIXES) -> list[Path]:
    """
    Expand a file, directory or glob pattern into sorted input files.

    Directories contribute their files with one of ``suffixes``.

    Raises:
        MissingInputError: If nothing matches.
    """
    text = str(pattern)
    path = Path(text)
    if path.is_dir():
        found = [p for p in path.iterdir() if p.is_file() and p.suffix.lower() in suffixes]
    elif glob.has_magic(text):
        found = [Path(p) for p in glob.glob(text) if Path(p).is_file()]
    elif path.is_file():
        found = [path]
    else:
        found = []
    if not found:
        raise MissingInputError(f"No input files match {text}")
    return sorted(found)


def sha256_file(path: Path) -> str:
    """Hex SHA-256 digest of a file's contents."""
    digest = hashlib.sha256()
    try:
        with path.open("rb") as f:
            for chunk in iter(lambda: f.read(_CHUNK), b""):
                digest.update(chunk)
    except OSError as e:
        raise UnreadableSourceError(f"Failed to read {path}: {e}", path=str(path)) from e
    return digest.hexdigest()


def hash_inputs(paths: list[Path]) -> list[InputFile]:
    """Content hashes of the inputs, keyed by file name."""
    return [InputFile(path=p.name, sha256=sha256_file(p)) for p in paths]


def write_json(path: Path, payload: BaseModel | Any) -> Path:
    """Write a model or plain data as indented JSON with a trailing newline."""
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    try:
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise UnreadableSourceError(f"Failed to write {path}: {e}", path=str(path)) from e
    return path


def write_manifest(manifest: RunManifest, out_dir: Path, prefix: str = "") -> Path:
    """
    Write the manifest and its stage timings side by side.

    Returns:
        Path of the manifest file.
    """
    path = write_json(
        out_dir / f"{prefix}{MANIFEST_FILE}", manifest.model_dump(mode="json", exclude={"timings"})
    )
    write_json(out_dir / f"{prefix}{TIMINGS_FILE}", manifest.timings)
    logger.debug("Wrote manifest %s", path)
    return path
