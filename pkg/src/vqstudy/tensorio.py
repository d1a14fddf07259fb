"""Minimal binary tensor exchange format.

Layout: a header of unsigned 32-bit little-endian integers (rank, then
one dimension per axis) followed by the values as 64-bit little-endian
floats in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["write_tensor", "read_tensor"]


def write_tensor(path, array) -> None:
    array = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    header = struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def read_tensor(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise ValueError(f"{path}: truncated tensor header")
    (rank,) = struct.unpack_from("<I", blob, 0)
    header_size = 4 + 4 * rank
    if len(blob) < header_size:
        raise ValueError(f"{path}: header promises rank {rank} but the file is too short")
    dims = struct.unpack_from(f"<{rank}I", blob, 4)
    count = int(np.prod(dims)) if rank else 1
    expected = header_size + 8 * count
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for dims {dims}, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8", offset=header_size, count=count)
    return values.reshape(dims).astype(float)
