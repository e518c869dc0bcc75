"""Binary tensor interchange format ("TPK1") and the run manifest.

Layout, little-endian throughout:

    magic   4 bytes  b"TPK1"
    version u16      currently 1
    dtype   u8       1 = IEEE-754 float32
    rank    u8
    dims    rank x u32
    payload product(dims) float32, row-major
    crc     u32      CRC32 of every preceding byte

Storage is 32-bit; compute everywhere else is 64-bit, so readers widen
and writers narrow at this boundary only.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"TPK1"
VERSION = 1
DTYPE_F32 = 1


def container_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if not np.all(np.isfinite(array)):
        raise DataError("refusing to serialize non-finite tensor")
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    head = MAGIC + struct.pack("<HBB", VERSION, DTYPE_F32, array.ndim)
    head += struct.pack(f"<{array.ndim}I", *array.shape)
    body = head + payload
    return body + struct.pack("<I", zlib.crc32(body))


def write_container(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(container_bytes(array))


def read_container(path: str | Path) -> np.ndarray:
    """Parse a TPK1 file into a float64 array; validates magic and CRC."""
    raw = Path(path).read_bytes()
    name = str(path)
    if len(raw) < 12:
        raise DataError(f"{name}: truncated container")
    if raw[:4] != MAGIC:
        raise DataError(f"{name}: bad magic {raw[:4]!r}")
    version, dtype, rank = struct.unpack_from("<HBB", raw, 4)
    if version != VERSION:
        raise DataError(f"{name}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise DataError(f"{name}: unsupported dtype code {dtype}")
    dims_end = 8 + 4 * rank
    if len(raw) < dims_end + 4:
        raise DataError(f"{name}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", raw, 8)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload_end = dims_end + 4 * count
    if len(raw) != payload_end + 4:
        raise DataError(f"{name}: payload length mismatch")
    (crc,) = struct.unpack_from("<I", raw, payload_end)
    if crc != zlib.crc32(raw[:payload_end]):
        raise DataError(f"{name}: CRC32 mismatch, file is corrupt")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=dims_end)
    return data.astype(np.float64).reshape(dims)


def emit_manifest(manifest: dict) -> bytes:
    """Canonical JSON encoding; parse -> emit round-trips byte-identical."""
    return json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_bytes(emit_manifest(manifest))


def read_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_bytes())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid manifest JSON: {exc}") from exc


def write_pgm(path: str | Path, mask: np.ndarray) -> None:
    """Binary mask as binary PGM (P5, maxval 255, foreground 255)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DataError("PGM masks must be 2-D")
    h, w = mask.shape
    header = f"P5\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + (mask.astype(np.uint8) * 255).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    name = str(path)
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(raw):
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":  # comment line
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if len(fields) != 4 or fields[0] != b"P5":
        raise DataError(f"{name}: not a binary PGM file")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise DataError(f"{name}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    body = raw[pos : pos + w * h]
    if len(body) != w * h:
        raise DataError(f"{name}: truncated PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w) >= 128
