"""Writer for the TPK1 tensor interchange format and run manifests.

This mirrors the consumer-side format contract byte for byte:

    magic   4 bytes  b"TPK1"
    version u16      currently 1
    dtype   u8       1 = IEEE-754 float32, little-endian
    rank    u8
    dims    rank x u32
    payload product(dims) float32, row-major
    crc     u32      CRC32 of every preceding byte

Manifests are canonical JSON (sorted keys, no whitespace) so identical
export jobs produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"TPK1"
VERSION = 1
DTYPE_F32 = 1


class ExportError(Exception):
    """Invalid input data or unusable weights."""

    exit_code = 2


def container_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if not np.all(np.isfinite(array)):
        raise ExportError("refusing to serialize non-finite tensor")
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    head = MAGIC + struct.pack("<HBB", VERSION, DTYPE_F32, array.ndim)
    head += struct.pack(f"<{array.ndim}I", *array.shape)
    body = head + payload
    return body + struct.pack("<I", zlib.crc32(body))


def write_container(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(container_bytes(array))


def write_manifest(path: str | Path, manifest: dict) -> None:
    encoded = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    Path(path).write_bytes(encoded)
