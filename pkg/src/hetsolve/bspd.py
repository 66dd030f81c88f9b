"""BSPD1 binary files for packed matrices, and the companion raw vector format.

Matrix layout (little endian): ``b"BSPD"``, version byte ``0x01``, ``u64 n``,
``u64 b``, then ``N(N+1)/2`` blocks in triangular-offset order, each ``b*b``
doubles row-major.  Vector layout: ``u64 n`` followed by ``n`` doubles.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import BlockedSPDMatrix, BlockVector, num_blocks
from .errors import FormatError, TruncatedFile, VersionMismatch

__all__ = ["load_matrix", "load_vector", "save_matrix", "save_vector"]

MAGIC = b"BSPD"
VERSION = 1
_HEADER = struct.Struct("<4sBQQ")
_F64 = np.dtype("<f8")


def save_matrix(path, M: BlockedSPDMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, M.n, M.b))
        fh.write(np.ascontiguousarray(M.blocks, dtype=_F64).tobytes())


def load_matrix(path) -> BlockedSPDMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 5:
        raise TruncatedFile(_HEADER.size, len(raw))
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r} in {os.fspath(path)!r}")
    if raw[4] != VERSION:
        raise VersionMismatch(raw[4], VERSION)
    if len(raw) < _HEADER.size:
        raise TruncatedFile(_HEADER.size, len(raw))
    _, _, n, b = _HEADER.unpack_from(raw)
    if n < 1 or b < 1:
        raise FormatError(f"invalid dimensions n={n}, b={b}")
    N = -(-n // b)
    count = num_blocks(N) * b * b
    expected = _HEADER.size + count * _F64.itemsize
    if len(raw) < expected:
        raise TruncatedFile(expected, len(raw))
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes after block data")
    data = np.frombuffer(raw, dtype=_F64, count=count, offset=_HEADER.size)
    return BlockedSPDMatrix(n, b, data.astype(np.float64).reshape(num_blocks(N), b, b))


def save_vector(path, v) -> None:
    values = v.values if isinstance(v, BlockVector) else np.asarray(v, dtype=np.float64).ravel()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", values.size))
        fh.write(np.ascontiguousarray(values, dtype=_F64).tobytes())


def load_vector(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise TruncatedFile(8, len(raw))
    (n,) = struct.unpack_from("<Q", raw)
    expected = 8 + 8 * n
    if len(raw) != expected:
        if len(raw) < expected:
            raise TruncatedFile(expected, len(raw))
        raise FormatError(f"{len(raw) - expected} trailing bytes after vector data")
    return np.frombuffer(raw, dtype=_F64, count=n, offset=8).astype(np.float64)
