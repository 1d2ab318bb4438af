"""Reader and writer for the ELF3 binary field format.

Layout: a 64-byte header (``b"ELF3"``, u32 version = 1, u32 n, u32 ncomp in
{1, 3, 9}, f64 box half-width, zero padding) followed by ``ncomp * n^3``
little-endian float64 values in (component, i, j, k) order, k fastest.
"""

from __future__ import annotations

import struct
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import Grid3, ScalarField, TensorField, VectorField

MAGIC = b"ELF3"
VERSION = 1
HEADER_SIZE = 64
_HEADER = struct.Struct("<4sIIId")
_KINDS = {1: ScalarField, 3: VectorField, 9: TensorField}


def encode_field(f) -> bytes:
    g = f.grid
    ncomp = f.ncomp
    head = _HEADER.pack(MAGIC, VERSION, g.n, ncomp, g.box_half)
    head += b"\0" * (HEADER_SIZE - len(head))
    payload = np.ascontiguousarray(f.data, dtype="<f8").tobytes()
    return head + payload


def decode_field(raw: bytes):
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"file too short for ELF3 header ({len(raw)} bytes)")
    magic, version, n, ncomp, box_half = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported ELF3 version {version}")
    if ncomp not in _KINDS:
        raise FormatError(f"ncomp must be 1, 3 or 9, got {ncomp}")
    expected = HEADER_SIZE + 8 * ncomp * n**3
    if len(raw) != expected:
        raise FormatError(f"payload size mismatch: {len(raw)} bytes, expected {expected}")
    try:
        grid = Grid3(n, box_half)
    except ValueError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from exc
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(np.float64)
    lead = {1: (), 3: (3,), 9: (3, 3)}[ncomp]
    return _KINDS[ncomp](grid, data.reshape(lead + grid.shape))


def write_field(path, f) -> Path:
    path = Path(path)
    path.write_bytes(encode_field(f))
    return path


def read_field(path):
    return decode_field(Path(path).read_bytes())


def sample_path(name="bump.elf3") -> Path:
    """Path of a sample file shipped in the package ``data`` directory."""
    path = Path(str(resources.files("elmorrey") / "data" / name))
    if not path.is_file():
        raise FileNotFoundError(f"no shipped sample named {name!r}")
    return path
