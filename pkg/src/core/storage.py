"""Artifact persistence: staged CSV/JSON/binary writes with all-or-nothing commit"""

import csv
import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Generator, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .models import RunManifest, WannierBasis
from ..utils.error_handler import NumericalError, ValidationError


logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".15g"
BASIS_MAGIC = b"GWB1"
MANIFEST_NAME = "manifest.json"


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


class ArtifactStore:
    """Writes run outputs into a hidden staging directory and publishes them together.

    Example:
        store = ArtifactStore("results")
        with store.transaction():
            store.write_csv("markers.csv", header, rows)
            store.write_manifest(manifest)
    """

    def __init__(self, root: str) -> None:
        self.root = Path(root)
        self.staging: Optional[Path] = None
        self.artifacts: List[str] = []

    @contextmanager
    def transaction(self) -> Generator["ArtifactStore", None, None]:
        """Stage writes; move them into place on success, discard them on error."""
        if self.staging is not None:
            raise RuntimeError("transaction already open")
        self.root.mkdir(parents=True, exist_ok=True)
        self.staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.root))
        self.artifacts = []
        try:
            yield self
            self._commit()
        except BaseException:
            logger.warning("discarding %d staged artifacts in %s", len(self.artifacts), self.root)
            raise
        finally:
            shutil.rmtree(self.staging, ignore_errors=True)
            self.staging = None

    def _commit(self) -> None:
        # マニフェストは最後に配置
        names = [n for n in self.artifacts if n != MANIFEST_NAME]
        if MANIFEST_NAME in self.artifacts:
            names.append(MANIFEST_NAME)
        for name in names:
            os.replace(self.staging / name, self.root / name)
        logger.info("committed %d artifacts to %s", len(names), self.root)

    def _target(self, name: str) -> Path:
        if self.staging is None:
            raise RuntimeError("writes need an open transaction")
        if os.path.basename(name) != name or name.startswith("."):
            raise ValidationError(f"artifact name must be a plain file name: {name}")
        if name in self.artifacts:
            raise ValidationError(f"artifact written twice: {name}")
        self.artifacts.append(name)
        return self.staging / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        """UTF-8 CSV with a header row; floats written with 15 significant digits."""
        with open(self._target(name), "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])

    def write_json(self, name: str, data: Any) -> None:
        with open(self._target(name), "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")

    def write_basis(self, name: str, basis: WannierBasis, N: int) -> None:
        save_basis(self._target(name), basis, N)

    def write_manifest(self, manifest: RunManifest) -> None:
        """Record every other staged artifact, then stage the manifest itself."""
        manifest.artifacts = [n for n in self.artifacts if n != MANIFEST_NAME]
        for name in manifest.artifacts:
            if (self.staging / name).stat().st_size == 0:
                raise NumericalError(f"artifact {name} is empty")
        self.write_json(MANIFEST_NAME, manifest.to_dict())


def save_basis(path, basis: WannierBasis, N: int) -> None:
    """Binary container: magic, int64 header (dim, n, M, N), centers, labels, column-major functions.

    Labels are written as zeros when the basis is not relabeled (j = 0 is
    never a valid degeneracy index).
    """
    dim, n = basis.functions.shape
    labels = basis.lattice_labels if basis.is_relabeled else np.zeros((n, 3), dtype=np.int64)
    with open(path, "wb") as f:
        f.write(BASIS_MAGIC)
        f.write(np.array([dim, n, basis.degeneracy, N], dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(basis.centers, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(labels, dtype="<i8").tobytes())
        f.write(np.asarray(basis.functions, dtype="<c16").tobytes(order="F"))


def load_basis(path) -> Tuple[WannierBasis, int]:
    """Inverse of :func:`save_basis`; returns (basis, N)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != BASIS_MAGIC:
        raise ValidationError(f"{path} is not a basis container")
    offset = 4
    dim, n, M, N = (int(v) for v in np.frombuffer(raw, dtype="<i8", count=4, offset=offset))
    offset += 32
    centers = np.frombuffer(raw, dtype="<f8", count=2 * n, offset=offset).reshape(n, 2)
    offset += 16 * n
    labels = np.frombuffer(raw, dtype="<i8", count=3 * n, offset=offset).reshape(n, 3)
    offset += 24 * n
    expected = offset + 16 * dim * n
    if len(raw) != expected:
        raise ValidationError(f"{path} has {len(raw)} bytes, expected {expected}")
    functions = np.frombuffer(raw, dtype="<c16", count=dim * n, offset=offset).reshape((dim, n), order="F")

    functions = np.array(functions, dtype=complex)
    if n and np.all(labels[:, 2] == 0):
        return WannierBasis(functions, np.array(centers)), N
    padding = np.linalg.norm(functions, axis=0) == 0
    return WannierBasis(functions, np.array(centers), np.array(labels), M, padding), N
