import struct
import zlib
from pathlib import Path

import numpy as np
import pytest

from conftest import random_codes
from pathintel.codes import (PREAMBLE_LEN, CodeKind, CodeMatrix,
                             load_code_matrix, mel_passthrough_codes,
                             write_code_matrix)
from pathintel.errors import FormatError, ValidationError
from pathintel.features import MelSpectrogram

GOLDEN = Path(__file__).parent / "golden" / "content_16x3.cdm"


def expected_cdm1_bytes(kind: int, c: int, t: int, values: np.ndarray) -> bytes:
    """Layout built by hand, independent of the writer."""
    header = b"CDM1" + bytes([1, kind, 0, 0, 0]) + struct.pack("<II", c, t)
    payload = values.astype("<f4").tobytes(order="C")
    crc = struct.pack("<I", zlib.crc32(payload, zlib.crc32(header)))
    return header + crc + payload


class TestCodeMatrix:
    def test_content_dim_enforced(self):
        with pytest.raises(ValidationError):
            CodeMatrix(CodeKind.CONTENT, np.zeros((8, 4)))

    def test_raw_mel_dim_enforced(self):
        with pytest.raises(ValidationError):
            CodeMatrix(CodeKind.RAW_MEL, np.zeros((16, 4)))

    def test_non_finite_rejected(self):
        vals = np.zeros((16, 2))
        vals[3, 1] = np.nan
        with pytest.raises(ValidationError):
            CodeMatrix(CodeKind.CONTENT, vals)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            CodeMatrix(CodeKind.RHYTHM, np.zeros((4, 0)))


class TestCdm1RoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        for kind, c in ((CodeKind.CONTENT, 16), (CodeKind.RHYTHM, 3),
                        (CodeKind.FREQUENCY, 32), (CodeKind.RAW_MEL, 80)):
            m = random_codes(rng, kind=kind, c=c, t=rng.integers(1, 40))
            p = tmp_path / f"{kind.name}.cdm"
            write_code_matrix(m, p)
            back = load_code_matrix(p)
            assert back.kind is m.kind
            assert back.values.tobytes() == m.values.tobytes()

    def test_16x1_zero_matrix_file_size(self, tmp_path):
        m = CodeMatrix(CodeKind.CONTENT, np.zeros((16, 1)))
        p = tmp_path / "z.cdm"
        write_code_matrix(m, p)
        raw = p.read_bytes()
        assert len(raw) == PREAMBLE_LEN + 64 == 21 + 64

    def test_row_major_payload_order(self, tmp_path):
        vals = np.arange(48, dtype=np.float32).reshape(16, 3)
        p = tmp_path / "seq.cdm"
        write_code_matrix(CodeMatrix(CodeKind.CONTENT, vals), p)
        m = load_code_matrix(p)
        assert m.values[1][2] == 1 * 3 + 2 == 5

    def test_exact_byte_layout(self, tmp_path):
        vals = np.arange(48, dtype=np.float32).reshape(16, 3)
        p = tmp_path / "layout.cdm"
        write_code_matrix(CodeMatrix(CodeKind.CONTENT, vals), p)
        assert p.read_bytes() == expected_cdm1_bytes(0, 16, 3, vals)

    def test_golden_file(self):
        # committed fixture pins the on-disk layout across releases
        vals = np.arange(48, dtype=np.float32).reshape(16, 3)
        assert GOLDEN.read_bytes() == expected_cdm1_bytes(0, 16, 3, vals)
        m = load_code_matrix(GOLDEN)
        assert m.kind is CodeKind.CONTENT
        np.testing.assert_array_equal(m.values, vals)

    def test_non_finite_refused_before_writing(self, tmp_path):
        vals = np.zeros((16, 2), dtype=np.float32)
        m = CodeMatrix(CodeKind.CONTENT, vals)
        bad = np.full((16, 2), np.inf, dtype=np.float32)
        object.__setattr__(m, "values", bad)  # bypass the gate
        p = tmp_path / "bad.cdm"
        # loader must still reject it if a writer ever lets one through
        write_code_matrix_unchecked = write_code_matrix
        write_code_matrix_unchecked(m, p)
        with pytest.raises(FormatError):
            load_code_matrix(p)


class TestCdm1Malformed:
    @pytest.fixture
    def sample(self, tmp_path):
        rng = np.random.default_rng(2)
        m = random_codes(rng, c=16, t=3)
        p = tmp_path / "m.cdm"
        write_code_matrix(m, p)
        return p, m

    def test_bad_magic(self, sample):
        p, _ = sample
        raw = bytearray(p.read_bytes())
        raw[0] ^= 0xFF
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_code_matrix(p)

    def test_kind_dim_mismatch(self, tmp_path):
        # header claims raw_mel but carries C=16
        header = b"CDM1" + bytes([1, 3, 0, 0, 0]) + struct.pack("<II", 16, 3)
        payload = b"\x00" * (16 * 3 * 4)
        crc = struct.pack("<I", zlib.crc32(payload, zlib.crc32(header)))
        body = header + crc + payload
        p = tmp_path / "mismatch.cdm"
        p.write_bytes(body)
        with pytest.raises(FormatError):
            load_code_matrix(p)

    def test_truncated_payload(self, sample):
        p, _ = sample
        raw = p.read_bytes()
        p.write_bytes(raw[:-4])
        with pytest.raises(FormatError):
            load_code_matrix(p)

    def test_truncated_preamble(self, sample):
        p, _ = sample
        p.write_bytes(p.read_bytes()[:10])
        with pytest.raises(FormatError):
            load_code_matrix(p)

    def test_single_byte_preamble_flips_all_detected(self, sample):
        p, m = sample
        raw = p.read_bytes()
        work = p.parent / "fuzz.cdm"
        for offset in range(PREAMBLE_LEN):
            for bit in range(8):
                mutated = bytearray(raw)
                mutated[offset] ^= 1 << bit
                work.write_bytes(bytes(mutated))
                with pytest.raises(FormatError):
                    load_code_matrix(work)


def test_mel_passthrough_identity():
    rng = np.random.default_rng(4)
    bins = rng.random((80, 10))
    mel = MelSpectrogram(bins, utterance_id="u1")
    m = mel_passthrough_codes(mel, speaker_id="s1")
    assert m.kind is CodeKind.RAW_MEL
    assert m.utterance_id == "u1"
    np.testing.assert_allclose(m.values, bins.astype(np.float32))


def test_mel_passthrough_silence_is_zero():
    mel = MelSpectrogram(np.zeros((80, 5)))
    assert np.all(mel_passthrough_codes(mel).values == 0.0)
