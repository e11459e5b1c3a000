"""The independent CDM1 writer must match the consumer's format exactly."""
import numpy as np
import pytest

from codebridge import cdm

# format oracle: the scoring package's own writer and loader
from pathintel import CodeKind, CodeMatrix, load_code_matrix, write_code_matrix
from pathintel.errors import FormatError


def test_bytes_identical_to_primary_writer(tmp_path):
    rng = np.random.default_rng(5)
    values = rng.normal(size=(16, 9)).astype(np.float32)
    cdm.write_atomic("content", values, tmp_path / "bridge.cdm")
    write_code_matrix(CodeMatrix(CodeKind.CONTENT, values),
                      tmp_path / "primary.cdm")
    assert (tmp_path / "bridge.cdm").read_bytes() == \
        (tmp_path / "primary.cdm").read_bytes()


def test_roundtrip_through_both_loaders(tmp_path):
    values = np.arange(32, dtype=np.float32).reshape(2, 16)
    cdm.write_atomic("rhythm", values, tmp_path / "x.cdm")
    kind, back = cdm.read(tmp_path / "x.cdm")
    assert kind == "rhythm" and np.array_equal(back, values)
    m = load_code_matrix(tmp_path / "x.cdm")
    assert m.kind is CodeKind.RHYTHM and np.array_equal(m.values, values)


def test_primary_rejects_corrupted_bridge_file(tmp_path):
    values = np.ones((3, 4), dtype=np.float32)
    path = tmp_path / "x.cdm"
    cdm.write_atomic("frequency", values, path)
    raw = bytearray(path.read_bytes())
    raw[30] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_code_matrix(path)
    with pytest.raises(ValueError):
        cdm.read(path)


def test_writer_validation(tmp_path):
    with pytest.raises(ValueError, match="C=16"):
        cdm.encode("content", np.ones((8, 4), dtype=np.float32))
    with pytest.raises(ValueError, match="non-finite"):
        cdm.encode("rhythm", np.full((2, 2), np.nan, dtype=np.float32))
    with pytest.raises(ValueError, match="unknown code kind"):
        cdm.encode("mel", np.ones((2, 2), dtype=np.float32))


def test_atomic_write_leaves_no_temp(tmp_path):
    cdm.write_atomic("content", np.zeros((16, 1), dtype=np.float32),
                     tmp_path / "x.cdm")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.cdm"]
    assert (tmp_path / "x.cdm").stat().st_size == 21 + 64
