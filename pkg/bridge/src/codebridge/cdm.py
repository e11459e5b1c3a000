"""Independent CDM1 writer and reader.

The layout is the shared on-disk contract between this bridge and the
scoring package; it is reimplemented here so the bridge carries no code
dependency on the consumer.

CDM1 (little-endian), 21-byte preamble then payload:

    offset  size  field
    0       4     magic b"CDM1"
    4       1     version, u8 = 1
    5       1     kind, u8: 0=content 1=rhythm 2=frequency 3=raw_mel
    6       3     reserved, must be zero
    9       4     C, u32
    13      4     T, u32
    17      4     CRC32 over bytes 0..16 and the payload
    21      C*T*4 payload, float32 row-major (row = code dim, col = frame)
"""
from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"CDM1"
VERSION = 1
PREAMBLE_LEN = 21
_HEADER_STRUCT = struct.Struct("<4sBB3sII")

KIND_CODES = {"content": 0, "rhythm": 1, "frequency": 2, "raw_mel": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


def encode(kind: str, values: np.ndarray) -> bytes:
    """Serialize a C x T float32 matrix to CDM1 bytes."""
    v = np.ascontiguousarray(values, dtype=np.float32)
    if v.ndim != 2 or v.shape[1] < 1:
        raise ValueError(f"code matrix must be 2-D with frames, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("code matrix contains non-finite values")
    if kind not in KIND_CODES:
        raise ValueError(f"unknown code kind {kind!r}")
    if kind == "content" and v.shape[0] != 16:
        raise ValueError(f"content codes must have C=16, got {v.shape[0]}")
    header = _HEADER_STRUCT.pack(MAGIC, VERSION, KIND_CODES[kind],
                                 b"\x00\x00\x00", v.shape[0], v.shape[1])
    payload = v.tobytes(order="C")
    crc = zlib.crc32(payload, zlib.crc32(header))
    return header + struct.pack("<I", crc) + payload


def write_atomic(kind: str, values: np.ndarray, path) -> None:
    """Write a CDM1 file via a temp file and rename, never a partial file."""
    path = Path(path)
    data = encode(kind, values)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read(path) -> tuple[str, np.ndarray]:
    """Parse a CDM1 file; returns (kind name, C x T float32 matrix)."""
    raw = Path(path).read_bytes()
    if len(raw) < PREAMBLE_LEN:
        raise ValueError(f"{path}: truncated preamble ({len(raw)} bytes)")
    header, (crc,) = raw[:17], struct.unpack_from("<I", raw, 17)
    if zlib.crc32(raw[PREAMBLE_LEN:], zlib.crc32(header)) != crc:
        raise ValueError(f"{path}: checksum mismatch")
    magic, version, kind_byte, reserved, c, t = _HEADER_STRUCT.unpack(header)
    if magic != MAGIC or version != VERSION or reserved != b"\x00\x00\x00":
        raise ValueError(f"{path}: malformed header")
    if kind_byte not in KIND_NAMES:
        raise ValueError(f"{path}: unknown code kind {kind_byte}")
    payload = raw[PREAMBLE_LEN:]
    if len(payload) != c * t * 4:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, "
                         f"expected {c * t * 4}")
    values = np.frombuffer(payload, dtype="<f4").reshape(c, t).copy()
    return KIND_NAMES[kind_byte], values
