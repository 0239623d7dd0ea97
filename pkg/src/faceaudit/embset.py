"""Embedding datasets: EMBS binary I/O, manifest parsing, validation, subsets.

An ``EmbeddingSet`` holds L2-normalized binary32 vectors plus one
``SampleMeta`` record per row. Normalizing at ingest lets every later cosine
comparison reduce to a dot product.
"""

from __future__ import annotations

import json
import math
import os
import statistics
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AuditError, IngestError
from .rng import make_rng

# Single home for the numeric tolerances of the data model.
ZERO_NORM_TOL = 1e-12
UNIT_NORM_TOL = 1e-6

EMBS_MAGIC = b"EMBS"
EMBS_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")

MATRIX_FILE = "embeddings.embs"
MANIFEST_FILE = "manifest.json"

DEFECT_KINDS = (
    "zero-vector",
    "non-finite",
    "dim-mismatch",
    "duplicate-id",
    "not-normalized",
    "empty-identity",
)


@dataclass(frozen=True)
class SampleMeta:
    sample_id: str
    identity: str
    group: str | None = None


@dataclass(frozen=True)
class Defect:
    sample_id: str
    kind: str


@dataclass(frozen=True)
class ValidationReport:
    n_samples: int
    n_identities: int
    samples_per_identity: dict
    defects: tuple[Defect, ...]

    @property
    def ok(self) -> bool:
        return not self.defects


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Immutable matrix of unit vectors with per-row identity metadata.

    The constructor does not validate; use :func:`from_arrays` or
    :func:`ingest` for checked construction, and :func:`validate` to audit a
    set built by other means.
    """

    vectors: np.ndarray
    manifest: tuple[SampleMeta, ...]
    name: str = ""
    dim: int = field(default=-1)

    def __post_init__(self):
        vecs = np.asarray(self.vectors)
        if vecs.ndim != 2:
            raise AuditError("bad-shape", f"vectors must be 2-D, got shape {vecs.shape}")
        if not vecs.flags.writeable and vecs.dtype == np.float32:
            frozen = vecs
        else:
            frozen = np.array(vecs, dtype=np.float32, copy=True)
            frozen.flags.writeable = False
        object.__setattr__(self, "vectors", frozen)
        object.__setattr__(self, "manifest", tuple(self.manifest))
        if self.dim == -1:
            object.__setattr__(self, "dim", int(frozen.shape[1]))

    def __len__(self) -> int:
        return len(self.manifest)

    @property
    def n_samples(self) -> int:
        return len(self.manifest)

    @cached_property
    def identity_index(self) -> Mapping[str, tuple[int, ...]]:
        """Identity label -> sample indices, identities in first-appearance order."""
        index: dict[str, list[int]] = {}
        for i, meta in enumerate(self.manifest):
            index.setdefault(meta.identity, []).append(i)
        return {k: tuple(v) for k, v in index.items()}

    @property
    def identities(self) -> tuple[str, ...]:
        return tuple(self.identity_index)

    @cached_property
    def sample_ids(self) -> tuple[str, ...]:
        return tuple(m.sample_id for m in self.manifest)

    @cached_property
    def _row_of(self) -> dict[str, int]:
        return {m.sample_id: i for i, m in enumerate(self.manifest)}

    def index_of(self, sample_id: str) -> int:
        try:
            return self._row_of[sample_id]
        except KeyError:
            raise AuditError("unresolvable-id", f"unknown sample_id {sample_id!r}") from None

    @cached_property
    def identity_codes(self) -> np.ndarray:
        """Per-sample integer identity code (position in ``identities``)."""
        code = {ident: c for c, ident in enumerate(self.identity_index)}
        out = np.fromiter((code[m.identity] for m in self.manifest), dtype=np.int64,
                          count=len(self.manifest))
        out.flags.writeable = False
        return out

    def identical_to(self, other: "EmbeddingSet") -> bool:
        return (
            self.dim == other.dim
            and self.manifest == other.manifest
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )


def normalize_rows(matrix: np.ndarray, sample_ids: Sequence[str]) -> np.ndarray:
    """Return binary32 unit rows; raise on zero or non-finite rows.

    Rows already within UNIT_NORM_TOL of unit length are kept bit-for-bit, so
    normalizing an exported set is the identity.
    """
    m64 = np.asarray(matrix, dtype=np.float64)
    finite = np.isfinite(m64).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise IngestError("non-finite-value", "row contains NaN or infinity", sample_ids[bad])
    norms = np.sqrt(np.einsum("ij,ij->i", m64, m64))
    zero = norms < ZERO_NORM_TOL
    if zero.any():
        bad = int(np.flatnonzero(zero)[0])
        raise IngestError("zero-vector", "row norm is below the zero tolerance", sample_ids[bad])
    out = np.asarray(matrix, dtype=np.float32).copy()
    rescale = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if rescale.any():
        out[rescale] = (m64[rescale] / norms[rescale, None]).astype(np.float32)
    return out


def _check_manifest(manifest: Sequence[SampleMeta]) -> None:
    seen: set[str] = set()
    for meta in manifest:
        if meta.sample_id in seen:
            raise IngestError("duplicate-sample-id", "sample_id appears twice", meta.sample_id)
        seen.add(meta.sample_id)
        if not meta.identity:
            raise IngestError("format-violation", "identity must be non-empty", meta.sample_id)


def from_arrays(vectors, manifest: Iterable[SampleMeta], name: str = "") -> EmbeddingSet:
    """Checked construction from an in-memory matrix and manifest."""
    manifest = tuple(manifest)
    vectors = np.asarray(vectors)
    if vectors.ndim != 2:
        raise IngestError("format-violation", f"matrix must be 2-D, got shape {vectors.shape}")
    if vectors.shape[0] != len(manifest):
        raise IngestError(
            "count-mismatch",
            f"matrix has {vectors.shape[0]} rows but manifest has {len(manifest)} entries",
        )
    _check_manifest(manifest)
    unit = normalize_rows(vectors, [m.sample_id for m in manifest])
    unit.flags.writeable = False
    return EmbeddingSet(unit, manifest, name=name)


def read_embs(path) -> np.ndarray:
    """Read an EMBS file into an (n_samples, dim) binary32 array."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise IngestError("format-violation", "file shorter than the EMBS header", str(path))
        magic, version, dim, n = _HEADER.unpack(head)
        if magic != EMBS_MAGIC:
            raise IngestError("format-violation", f"bad magic {magic!r}", str(path))
        if version != EMBS_VERSION:
            raise IngestError("format-violation", f"unsupported version {version}", str(path))
        if dim == 0:
            raise IngestError("format-violation", "dim must be positive", str(path))
        expected = _HEADER.size + n * dim * 4
        actual = os.fstat(fh.fileno()).st_size
        if actual != expected:
            raise IngestError(
                "format-violation",
                f"payload size mismatch: expected {expected} bytes, found {actual}",
                str(path),
            )
        data = np.fromfile(fh, dtype="<f4", count=n * dim)
    return data.reshape(n, dim).astype(np.float32, copy=False)


def write_embs(path, matrix) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    n, dim = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBS_MAGIC, EMBS_VERSION, dim, n))
        fh.write(matrix.tobytes())


def read_manifest(path) -> list[SampleMeta]:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = json.load(fh)
    except json.JSONDecodeError as exc:
        raise IngestError("format-violation", f"manifest is not valid JSON: {exc}", str(path)) from None
    if not isinstance(rows, list):
        raise IngestError("format-violation", "manifest must be a JSON array", str(path))
    out = []
    for pos, row in enumerate(rows):
        if not isinstance(row, dict):
            raise IngestError("format-violation", "manifest entry is not an object", f"row {pos}")
        sid, ident, group = row.get("sample_id"), row.get("identity"), row.get("group")
        if not isinstance(sid, str) or not sid:
            raise IngestError("format-violation", "sample_id must be a non-empty string", f"row {pos}")
        if not isinstance(ident, str):
            raise IngestError("format-violation", "identity must be a string", sid)
        if group is not None and not isinstance(group, str):
            raise IngestError("format-violation", "group must be a string or null", sid)
        out.append(SampleMeta(sid, ident, group))
    return out


def write_manifest(path, manifest: Iterable[SampleMeta]) -> None:
    rows = [{"sample_id": m.sample_id, "identity": m.identity, "group": m.group} for m in manifest]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def ingest(raw_matrix_path, manifest_path, name: str | None = None) -> EmbeddingSet:
    """Load, validate and L2-normalize an EMBS matrix with its JSON manifest."""
    matrix = read_embs(raw_matrix_path)
    manifest = read_manifest(manifest_path)
    if name is None:
        name = Path(raw_matrix_path).stem
    return from_arrays(matrix, manifest, name=name)


def export(eset: EmbeddingSet, matrix_path, manifest_path) -> None:
    write_embs(matrix_path, eset.vectors)
    write_manifest(manifest_path, eset.manifest)


def save_set(eset: EmbeddingSet, directory) -> Path:
    """Write a set directory (``embeddings.embs`` + ``manifest.json``)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    export(eset, directory / MATRIX_FILE, directory / MANIFEST_FILE)
    return directory


def load_set(directory) -> EmbeddingSet:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"set directory not found: {directory}")
    name = directory.name.removesuffix(".embset")
    return ingest(directory / MATRIX_FILE, directory / MANIFEST_FILE, name=name)


def validate(eset: EmbeddingSet) -> ValidationReport:
    defects: list[Defect] = []
    ids = eset.sample_ids
    vecs = np.asarray(eset.vectors, dtype=np.float64)
    if vecs.shape[1] != eset.dim:
        defects.extend(Defect(sid, "dim-mismatch") for sid in ids)
    if vecs.shape[0] != len(ids):
        defects.append(Defect("", "dim-mismatch"))
    seen: set[str] = set()
    for sid in ids:
        if sid in seen:
            defects.append(Defect(sid, "duplicate-id"))
        seen.add(sid)
    for meta in eset.manifest:
        if not meta.identity:
            defects.append(Defect(meta.sample_id, "empty-identity"))
    n = min(vecs.shape[0], len(ids))
    with np.errstate(invalid="ignore", over="ignore"):
        finite = np.isfinite(vecs[:n]).all(axis=1)
        norms = np.sqrt((vecs[:n] ** 2).sum(axis=1))
    for i in range(n):
        if not finite[i]:
            defects.append(Defect(ids[i], "non-finite"))
        elif norms[i] < ZERO_NORM_TOL:
            defects.append(Defect(ids[i], "zero-vector"))
        elif abs(norms[i] - 1.0) > UNIT_NORM_TOL:
            defects.append(Defect(ids[i], "not-normalized"))

    counts = [len(v) for v in eset.identity_index.values()]
    spi = (
        {"min": min(counts), "median": statistics.median(counts), "max": max(counts)}
        if counts
        else {"min": 0, "median": 0, "max": 0}
    )
    return ValidationReport(
        n_samples=len(ids),
        n_identities=len(counts),
        samples_per_identity=spi,
        defects=tuple(defects),
    )


def subset(eset: EmbeddingSet, identity_fraction: float, seed: int) -> EmbeddingSet:
    """Keep a seeded uniform sample of identities (all of their samples).

    ``ceil(fraction * n_identities)`` identities are drawn without replacement;
    retained rows keep their original relative order.
    """
    if not 0.0 < identity_fraction <= 1.0:
        raise AuditError("bad-fraction", f"identity_fraction must lie in (0, 1], got {identity_fraction}")
    idents = eset.identities
    # The small slack stops 0.3 * 10 == 3.0000000000000004 rounding up to 4.
    m = math.ceil(identity_fraction * len(idents) - 1e-9)
    if m < 2:
        raise AuditError("too-few-identities", f"subset would keep {m} identities; need at least 2")
    if m == len(idents):
        return eset
    rng = make_rng(seed)
    chosen = set(rng.permutation(len(idents))[:m].tolist())
    keep_codes = np.zeros(len(idents), dtype=bool)
    keep_codes[list(chosen)] = True
    rows = np.flatnonzero(keep_codes[eset.identity_codes])
    vecs = eset.vectors[rows]
    vecs.flags.writeable = False
    return EmbeddingSet(vecs, tuple(eset.manifest[i] for i in rows), name=eset.name)
