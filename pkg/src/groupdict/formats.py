"""File formats: coefficient container, CSV dumps, and MNIST IDX files.

Coefficient container (little-endian)::

    b"GDFC"  uint32 version=1  uint32 n_records
    per record:
        uint8 group (0=SO2, 1=O2, 2=SO3)  int32 bandwidth  int32 n_irreps
        per irrep: int32 label  int32 dim  dim*dim (re, im) float64 pairs, row-major
"""

from __future__ import annotations

import csv
import gzip
import io
import struct
from typing import List, Sequence

import numpy as np

from .harmonics import FourierCoefficients, Group, IrrepIndex, IrrepTable
from .lifting import RasterImage

__all__ = [
    "FormatError",
    "dumps_coefficients",
    "loads_coefficients",
    "save_coefficients",
    "load_coefficients",
    "write_coefficients_csv",
    "write_csv",
    "parse_idx",
    "parse_idx_labels",
    "write_idx_images",
    "write_idx_labels",
]

MAGIC = b"GDFC"
VERSION = 1
_GROUP_TAGS = {Group.SO2: 0, Group.O2: 1, Group.SO3: 2}
_TAG_GROUPS = {v: k for k, v in _GROUP_TAGS.items()}


class FormatError(ValueError):
    """Malformed or truncated input file."""


def dumps_coefficients(records: Sequence[FourierCoefficients]) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<II", VERSION, len(records)))
    for rec in records:
        table = rec.table
        out.write(struct.pack("<Bii", _GROUP_TAGS[table.group], table.bandwidth, len(table)))
        for xi, blk in zip(table, rec.blocks):
            out.write(struct.pack("<ii", xi.label, xi.dim))
            pairs = np.empty(blk.size * 2, dtype="<f8")
            pairs[0::2] = blk.real.ravel()
            pairs[1::2] = blk.imag.ravel()
            out.write(pairs.tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads_coefficients(data: bytes) -> List[FourierCoefficients]:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("not a coefficient container")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    records = []
    for _ in range(count):
        tag, bandwidth, n_irreps = r.unpack("<Bii")
        if tag not in _TAG_GROUPS:
            raise FormatError(f"unknown group tag {tag}")
        group = _TAG_GROUPS[tag]
        entries, blocks = [], []
        for _ in range(n_irreps):
            label, dim = r.unpack("<ii")
            xi = IrrepIndex(group, label)
            if xi.dim != dim:
                raise FormatError(f"irrep {label} declares dimension {dim}, expected {xi.dim}")
            pairs = np.frombuffer(r.take(16 * dim * dim), dtype="<f8")
            blocks.append((pairs[0::2] + 1j * pairs[1::2]).reshape(dim, dim))
            entries.append(xi)
        records.append(FourierCoefficients(IrrepTable(group, bandwidth, tuple(entries)), blocks))
    if r.pos != len(data):
        raise FormatError("trailing bytes after last record")
    return records


def save_coefficients(path, records: Sequence[FourierCoefficients]) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_coefficients(records))


def load_coefficients(path) -> List[FourierCoefficients]:
    with open(path, "rb") as fh:
        return loads_coefficients(fh.read())


def write_coefficients_csv(path, coeffs: FourierCoefficients) -> None:
    """Debug dump with columns irrep, row, col, re, im."""
    rows = []
    for xi, blk in zip(coeffs.table, coeffs.blocks):
        for (a, b), v in np.ndenumerate(blk):
            rows.append((xi.label, a, b, repr(float(v.real)), repr(float(v.imag))))
    write_csv(path, ("irrep", "row", "col", "re", "im"), rows)


def write_csv(path, header, rows) -> None:
    """Write rows with ``repr`` floats so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# IDX


def _read_bytes(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(path) -> List[RasterImage]:
    """Images of an IDX3 file (magic 0x00000803), scaled so byte 255 is 1.0.

    Raises:
        FormatError: wrong magic number or truncated data.
    """
    data = _read_bytes(path)
    if len(data) < 16:
        raise FormatError("truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != 0x00000803:
        raise FormatError(f"bad IDX image magic 0x{magic:08x}")
    need = count * rows * cols
    if len(data) - 16 < need:
        raise FormatError("truncated IDX image data")
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=16).reshape(count, rows, cols)
    return [RasterImage(cols, rows, p / 255.0) for p in pix]


def parse_idx_labels(path) -> np.ndarray:
    """Labels of an IDX1 file (magic 0x00000801)."""
    data = _read_bytes(path)
    if len(data) < 8:
        raise FormatError("truncated IDX header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != 0x00000801:
        raise FormatError(f"bad IDX label magic 0x{magic:08x}")
    if len(data) - 8 < count:
        raise FormatError("truncated IDX label data")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).copy()


def write_idx_images(path, pixels) -> None:
    """Write a uint8 array (count, rows, cols) as an IDX3 file."""
    pix = np.asarray(pixels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *pix.shape))
        fh.write(pix.tobytes())


def write_idx_labels(path, labels) -> None:
    lab = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, lab.size))
        fh.write(lab.tobytes())
