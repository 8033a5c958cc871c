"""
File I/O helpers for model directories.

A model directory holds manifest.json plus one CSV per matrix. Every
matrix file is listed in the manifest with its SHA-256 digest.
"""
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator

import numpy as np

from kdn.errors import ArtifactError, ChecksumMismatch, IoError, ManifestVersionMismatch
from kdn.utils.csv_parser import read_matrix_csv, write_matrix_csv
from kdn.utils.hashing import file_sha256

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


@contextmanager
def io_errors(path: Path, action: str = 'write') -> Iterator[None]:
    """Re-raise OSError from the block as IoError naming the path."""
    try:
        yield
    except OSError as e:
        raise IoError(f"cannot {action} {path}: {e.strerror or e}") from e


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    with io_errors(path, 'create'):
        path.mkdir(parents=True, exist_ok=True)
    return path


def write_text(path: Path, text: str) -> None:
    with io_errors(path):
        Path(path).write_text(text)


class ModelStore:
    """Reads and writes one model directory."""

    def __init__(self, model_dir: Path):
        self.model_dir = Path(model_dir)

    @property
    def manifest_path(self) -> Path:
        return self.model_dir / 'manifest.json'

    def layer_dir(self, index: int) -> str:
        """Relative directory of a 1-based layer."""
        return f'layer_{index:02d}'

    def _read_json(self, path: Path) -> Any:
        if not path.exists():
            raise ArtifactError(f"{path} does not exist")
        with io_errors(path, 'read'), open(path, 'r') as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ArtifactError(f"{path} is not valid JSON ({e})") from e

    def _write_json(self, path: Path, data: Any) -> None:
        write_text(path, dumps(data))

    def save_matrix(self, relative: str, matrix: np.ndarray) -> Dict[str, str]:
        """Write a matrix file and return its manifest entry."""
        path = self.model_dir / relative
        ensure_dir(path.parent)
        with io_errors(path):
            write_matrix_csv(path, matrix)
        return {'path': relative, 'sha256': file_sha256(path)}

    def load_matrix(self, entry: Dict[str, str]) -> np.ndarray:
        """Read a matrix file after checking it against its manifest digest."""
        path = self.model_dir / entry['path']
        if not path.exists():
            raise ArtifactError(f"{path} is missing")
        with io_errors(path, 'read'):
            digest = file_sha256(path)
        if digest != entry['sha256']:
            raise ChecksumMismatch(f"{path}: expected sha256 {entry['sha256']}, found {digest}")
        with io_errors(path, 'read'):
            return read_matrix_csv(path)

    def save_manifest(self, manifest: Dict[str, Any]) -> None:
        ensure_dir(self.model_dir)
        self._write_json(self.manifest_path, {**manifest, 'schema_version': MANIFEST_VERSION})
        logger.info("Saved model manifest to %s", self.manifest_path)

    def load_manifest(self) -> Dict[str, Any]:
        manifest = self._read_json(self.manifest_path)
        version = manifest.get('schema_version') if isinstance(manifest, dict) else None
        if version != MANIFEST_VERSION:
            raise ManifestVersionMismatch(
                f"{self.manifest_path}: schema_version {version!r}, expected {MANIFEST_VERSION}"
            )
        return manifest
