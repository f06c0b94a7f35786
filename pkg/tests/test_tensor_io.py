"""
Binary tensor container tests
"""

import numpy as np
import pytest

from segcurate.core.exceptions import DatasetFormatException, DatasetIOException
from segcurate.core.tensor_io import read_f32, read_tensor_file, write_f32, write_tensor_file


def test_tensor_file_round_trip(tmp_path):
    path = tmp_path / "t.bin"
    a = np.arange(6, dtype=np.float64).reshape(2, 3) / 4
    b = np.array([0.1, -2.5])
    write_tensor_file(path, {"format": "test", "n": 2}, [("a", a), ("b", b)])

    header, tensors = read_tensor_file(path)
    assert header["format"] == "test"
    assert header["n"] == 2
    assert list(tensors) == ["a", "b"]
    assert np.array_equal(tensors["a"], a)
    assert np.array_equal(tensors["b"], b.astype(np.float32).astype(np.float64))


def test_layout_is_little_endian_float32(tmp_path):
    path = tmp_path / "t.bin"
    write_tensor_file(path, {}, [("x", np.array([1.0]))])
    raw = path.read_bytes()
    header_len = int.from_bytes(raw[:4], "little")
    assert raw[4 + header_len:] == np.array([1.0], dtype="<f4").tobytes()


def test_trailing_bytes(tmp_path):
    path = tmp_path / "t.bin"
    write_tensor_file(path, {}, [("x", np.zeros(3))])
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(DatasetFormatException):
        read_tensor_file(path)


def test_truncated_and_missing(tmp_path):
    path = tmp_path / "t.bin"
    path.write_bytes(b"\x01")
    with pytest.raises(DatasetFormatException):
        read_tensor_file(path)
    with pytest.raises(DatasetIOException):
        read_tensor_file(tmp_path / "missing.bin")


def test_flat_f32(tmp_path):
    path = tmp_path / "r.f32"
    pixels = np.linspace(0, 1, 12).reshape(3, 4)
    write_f32(path, pixels)
    np.testing.assert_array_equal(read_f32(path, (3, 4)), pixels.astype(np.float32))
    with pytest.raises(DatasetFormatException):
        read_f32(path, (5, 4))
