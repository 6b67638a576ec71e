"""SQGF snapshot files and CSV helpers.

SQGF layout (all little-endian)::

    b"SQGF"  | u8 version (=1) | u32 n1 | u32 n2 | f64 L1 | f64 L2 | n1*n2 f64 values

Values are physical, row-major with x1 fastest.  A file with ``n1 == 1``
holds a zonal profile.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .limits import ZonalProfile
from .spectral import GridSpec, PhysicalField, SpectralField, inverse_transform

MAGIC = b"SQGF"
VERSION = 1
_HEADER = struct.Struct("<4sBIIdd")


class SnapshotFormatError(ValueError):
    pass


def encode_snapshot(field: PhysicalField | SpectralField | ZonalProfile) -> bytes:
    if isinstance(field, SpectralField):
        field = inverse_transform(field)
    if isinstance(field, ZonalProfile):
        grid, n1, values = field.grid, 1, field.values()
    else:
        grid, n1, values = field.grid, field.grid.n1, field.values
    header = _HEADER.pack(MAGIC, VERSION, n1, grid.n2, grid.L1, grid.L2)
    return header + np.ascontiguousarray(values, dtype="<f8").tobytes()


def decode_snapshot(data: bytes) -> PhysicalField | ZonalProfile:
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("truncated SQGF header")
    magic, version, n1, n2, L1, L2 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported SQGF version {version}")
    body = data[_HEADER.size :]
    if len(body) != 8 * n1 * n2:
        raise SnapshotFormatError(f"expected {8 * n1 * n2} value bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8").astype(float)
    if n1 == 1:
        grid = GridSpec(4, n2, L1, L2)
        return ZonalProfile.from_values(grid, values)
    return PhysicalField(GridSpec(n1, n2, L1, L2), values.reshape(n2, n1))


def write_snapshot(path: str | Path, field) -> int:
    data = encode_snapshot(field)
    Path(path).write_bytes(data)
    return len(data)


def read_snapshot(path: str | Path):
    return decode_snapshot(Path(path).read_bytes())


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """UTF-8 CSV with a header row; floats written with repr precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_zonal_csv(path: str | Path, profile: ZonalProfile) -> None:
    write_csv(path, ["k", "Re", "Im"], profile.rows())


def read_zonal_csv(path: str | Path, grid: GridSpec) -> ZonalProfile:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    coeffs = np.zeros(grid.n2, dtype=complex)
    for r in rows:
        coeffs[int(r["k"]) % grid.n2] = complex(float(r["Re"]), float(r["Im"]))
    return ZonalProfile(grid, coeffs)
