"""Latent code-matrix model and the CDM1 on-disk format.

CDM1 layout (little-endian), 21 bytes of preamble before the payload:

    offset  size  field
    0       4     magic b"CDM1"
    4       1     version, u8 = 1
    5       1     kind, u8: 0=content 1=rhythm 2=frequency 3=raw_mel
    6       3     reserved, must be zero
    9       4     C, u32
    13      4     T, u32
    17      4     CRC32 over bytes 0..16 and the payload (corruption guard)
    21      C*T*4 payload, float32 row-major (row = code dim, col = frame)

A golden file is committed under tests/golden/ and the exact layout is
asserted there byte by byte.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .features import MelSpectrogram

MAGIC = b"CDM1"
VERSION = 1
PREAMBLE_LEN = 21
_HEADER_STRUCT = struct.Struct("<4sBB3sII")  # 17 bytes, then u32 crc


class CodeKind(Enum):
    CONTENT = 0
    RHYTHM = 1
    FREQUENCY = 2
    RAW_MEL = 3

    @property
    def expected_dim(self) -> int | None:
        """Fixed row count where the kind implies one (None = free)."""
        if self is CodeKind.CONTENT:
            return 16
        if self is CodeKind.RAW_MEL:
            return 80
        return None


@dataclass(frozen=True)
class CodeMatrix:
    """C x T latent code sequence for one utterance."""

    kind: CodeKind
    values: np.ndarray
    speaker_id: str = ""
    utterance_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValidationError(f"code matrix must be 2-D, got shape {v.shape}")
        if v.shape[1] < 1:
            raise ValidationError("code matrix has no frames")
        expected = self.kind.expected_dim
        if expected is not None and v.shape[0] != expected:
            raise ValidationError(
                f"{self.kind.name} codes must have C={expected}, got {v.shape[0]}"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("code matrix contains non-finite values")

    @property
    def C(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


def write_code_matrix(m: CodeMatrix, path) -> None:
    """Serialize to CDM1; load_code_matrix inverts it bit-for-bit."""
    header = _HEADER_STRUCT.pack(
        MAGIC, VERSION, m.kind.value, b"\x00\x00\x00", m.C, m.T
    )
    payload = np.ascontiguousarray(m.values, dtype=np.float32).tobytes(order="C")
    crc = zlib.crc32(payload, zlib.crc32(header))
    Path(path).write_bytes(header + struct.pack("<I", crc) + payload)


def load_code_matrix(path, speaker_id: str = "", utterance_id: str = "") -> CodeMatrix:
    """Parse a CDM1 file, rejecting any malformed or corrupted header."""
    raw = Path(path).read_bytes()
    if len(raw) < PREAMBLE_LEN:
        raise FormatError(f"{path}: truncated preamble ({len(raw)} bytes)")
    header, (crc,) = raw[:17], struct.unpack_from("<I", raw, 17)
    if zlib.crc32(raw[PREAMBLE_LEN:], zlib.crc32(header)) != crc:
        raise FormatError(f"{path}: checksum mismatch")
    magic, version, kind_byte, reserved, c, t = _HEADER_STRUCT.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if reserved != b"\x00\x00\x00":
        raise FormatError(f"{path}: nonzero reserved bytes")
    try:
        kind = CodeKind(kind_byte)
    except ValueError:
        raise FormatError(f"{path}: unknown code kind {kind_byte}") from None
    expected = kind.expected_dim
    if expected is not None and c != expected:
        raise FormatError(
            f"{path}: kind {kind.name} requires C={expected}, header says {c}"
        )
    if c < 1 or t < 1:
        raise FormatError(f"{path}: degenerate dimensions C={c}, T={t}")
    payload = raw[PREAMBLE_LEN:]
    if len(payload) != c * t * 4:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {c * t * 4}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(c, t)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return CodeMatrix(kind, values.copy(), speaker_id, utterance_id)


def mel_passthrough_codes(mel: MelSpectrogram, speaker_id: str = "") -> CodeMatrix:
    """Baseline provider: treat the raw mel-spectrogram as the code matrix."""
    return CodeMatrix(
        CodeKind.RAW_MEL, mel.bins, speaker_id=speaker_id,
        utterance_id=mel.utterance_id,
    )
