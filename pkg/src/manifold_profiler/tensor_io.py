"""Point-cloud and manifest I/O.

Binary layout ("IDPC v1", little-endian)::

    0-3    b"IDPC"
    4      version (0x01)
    5      dtype   (0x01 = f32, 0x02 = f64)
    6-7    reserved, zero
    8-15   u64 N
    16-23  u64 D
    24-    N*D values, row-major

Payloads are always promoted to float64 on load.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    FormatError,
    InconsistentN,
    IoFailure,
    MissingLayerFile,
    NonFiniteValue,
    NonNumericCell,
    RaggedRows,
    SchemaError,
    TruncatedFile,
    UnsupportedVersion,
    ValidationError,
)

MAGIC = b"IDPC"
VERSION = 1
HEADER = struct.Struct("<4sBBHQQ")
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
PRECISION_CODES = {"f32": 1, "f64": 2}


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An immutable N x D matrix of representations.

    ``data`` is stored as a read-only float64 array so that a loaded cloud
    can be shared across threads without copying.
    """

    data: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"point cloud must be a non-empty 2-D matrix, got shape {arr.shape}")
        _check_finite(arr, self.label)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.n_points

    def __repr__(self):
        return f"PointCloud(n_points={self.n_points}, dim={self.dim}, label={self.label!r})"

    def take(self, rows, label=None) -> "PointCloud":
        return PointCloud(self.data[np.asarray(rows)], self.label if label is None else label)


def _check_finite(arr, label=""):
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteValue(int(r), int(c), f" in {label}" if label else "")


def _read_header(fh, path):
    raw = fh.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not an IDPC file")
    if len(raw) < HEADER.size:
        raise TruncatedFile(f"{path}: header is {len(raw)} bytes, expected {HEADER.size}")
    magic, version, dtype_code, _reserved, n, d = HEADER.unpack(raw)
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}")
    if dtype_code not in DTYPES:
        raise UnsupportedVersion(f"{path}: unknown dtype code {dtype_code}")
    return DTYPES[dtype_code], n, d


def read_header(path) -> tuple[np.dtype, int, int]:
    """Return (dtype, N, D) without touching the payload."""
    try:
        with open(path, "rb") as fh:
            return _read_header(fh, path)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_pointcloud(path, label=None) -> PointCloud:
    try:
        with open(path, "rb") as fh:
            dtype, n, d = _read_header(fh, path)
            expected = n * d * dtype.itemsize
            payload = fh.read(expected)
            if len(payload) < expected:
                raise TruncatedFile(f"{path}: payload is {len(payload)} bytes, expected {expected}")
            if fh.read(1):
                raise FormatError(f"{path}: trailing bytes after payload")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    data = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(n, d)
    return PointCloud(data, label=str(path) if label is None else label)


def write_pointcloud(cloud: PointCloud, path, precision: str = "f64") -> None:
    if precision not in PRECISION_CODES:
        raise ValidationError(f"precision must be one of {sorted(PRECISION_CODES)}")
    code = PRECISION_CODES[precision]
    # astype rounds to nearest, ties to even
    payload = np.ascontiguousarray(cloud.data, dtype=DTYPES[code]).tobytes()
    header = HEADER.pack(MAGIC, VERSION, code, 0, cloud.n_points, cloud.dim)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_csv(path, has_header: bool = False, label=None) -> PointCloud:
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, record in enumerate(csv.reader(fh)):
                if has_header and lineno == 0:
                    continue
                if not record or all(not cell.strip() for cell in record):
                    continue
                try:
                    rows.append([float(cell) for cell in record])
                except ValueError:
                    bad = next(c for c in record if not _is_float(c))
                    raise NonNumericCell(f"{path}: line {lineno + 1}: {bad!r}") from None
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"{path}: data row {i} has {len(row)} cells, expected {width}")
    return PointCloud(np.array(rows), label=str(path) if label is None else label)


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class LayerEntry:
    index: int
    path: Path


@dataclass(frozen=True)
class Manifest:
    model: str
    corpus: str
    layers: list[LayerEntry] = field(default_factory=list)
    surprisal: float | None = None
    source: Path | None = None

    @property
    def indices(self) -> list[int]:
        return [e.index for e in self.layers]

    def load(self, index: int) -> PointCloud:
        for e in self.layers:
            if e.index == index:
                return read_pointcloud(e.path, label=f"{self.model}/{self.corpus}/layer{index}")
        raise ValidationError(f"layer {index} not in manifest")

    def load_all(self) -> list[PointCloud]:
        return [self.load(e.index) for e in self.layers]


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("<document>", "must be a JSON object")
    for key in ("model", "corpus"):
        if not isinstance(doc.get(key), str):
            raise SchemaError(key, "required string")
    surprisal = doc.get("surprisal")
    if surprisal is not None:
        if isinstance(surprisal, bool) or not isinstance(surprisal, (int, float)):
            raise SchemaError("surprisal", "must be a number")
        if not np.isfinite(surprisal) or surprisal < 0:
            raise SchemaError("surprisal", "must be a finite non-negative number")
        surprisal = float(surprisal)
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise SchemaError("layers", "required non-empty list")

    entries = []
    for pos, item in enumerate(layers):
        where = f"layers[{pos}]"
        if not isinstance(item, dict):
            raise SchemaError(where, "must be an object")
        idx = item.get("index")
        if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
            raise SchemaError(f"{where}.index", "required non-negative integer")
        fname = item.get("file")
        if not isinstance(fname, str) or not fname:
            raise SchemaError(f"{where}.file", "required string")
        entries.append(LayerEntry(idx, (path.parent / fname)))
    entries.sort(key=lambda e: e.index)
    for a, b in zip(entries, entries[1:]):
        if a.index == b.index:
            raise SchemaError("layers", f"duplicate index {a.index}")

    n_ref = None
    for e in entries:
        if not os.path.isfile(e.path) or not os.access(e.path, os.R_OK):
            raise MissingLayerFile(f"layer {e.index}: {e.path} not readable")
        _, n, _ = read_header(e.path)
        if n_ref is None:
            n_ref = n
        elif n != n_ref:
            raise InconsistentN(f"layer {e.index} has N={n}, expected {n_ref}")
    return Manifest(doc["model"], doc["corpus"], entries, surprisal, path)


def write_manifest(path, model, corpus, layer_files, surprisal=None) -> None:
    """Write a manifest; ``layer_files`` is a list of (index, filename) pairs."""
    doc = {"model": model, "corpus": corpus}
    if surprisal is not None:
        doc["surprisal"] = surprisal
    doc["layers"] = [{"index": int(i), "file": str(f)} for i, f in layer_files]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
