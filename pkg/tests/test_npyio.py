"""Tensor file dialect: strict NPY 1.0, float32, 3-D, C order."""

import struct

import numpy as np
import pytest

from featsim import npyio
from featsim.errors import FormatError, ShapeError


def test_round_trip_bit_exact(tmp_path) -> None:
    rng = np.random.default_rng(7)
    for shape in [(1, 1, 1), (3, 2, 1), (10, 4, 5), (56, 56, 4), (64, 1, 64)]:
        arr = rng.normal(size=shape).astype(np.float32)
        path = str(tmp_path / "t.npy")
        npyio.save_tensor(path, arr)
        back = npyio.load_tensor(path)
        assert back.dtype == np.float32
        assert back.shape == shape
        assert np.array_equal(back, arr)


def test_round_trip_many_small_shapes(tmp_path) -> None:
    rng = np.random.default_rng(11)
    path = str(tmp_path / "t.npy")
    for _ in range(40):
        shape = tuple(int(v) for v in rng.integers(1, 65, size=3))
        arr = rng.normal(size=shape).astype(np.float32)
        npyio.save_tensor(path, arr)
        assert np.array_equal(npyio.load_tensor(path), arr)


def test_zero_tensor_payload_is_zero_bits() -> None:
    payload = npyio.write_tensor_bytes(np.zeros((2, 2, 1), dtype=np.float32))
    assert payload.endswith(b"\x00" * 16)
    assert len(payload) - 16 == 128  # magic+version+len+padded header


def test_single_element_ieee_bits() -> None:
    payload = npyio.write_tensor_bytes(np.ones((1, 1, 1), dtype=np.float32))
    assert payload[-4:] == struct.pack("<I", 0x3F800000)


def test_header_fields_and_alignment() -> None:
    payload = npyio.write_tensor_bytes(np.zeros((5, 7, 3), dtype=np.float32))
    assert payload.startswith(b"\x93NUMPY\x01\x00")
    (hlen,) = struct.unpack("<H", payload[8:10])
    assert (10 + hlen) % 64 == 0
    header = payload[10 : 10 + hlen].decode("latin1")
    assert "'descr': '<f4'" in header
    assert "'fortran_order': False" in header
    assert "(5, 7, 3)" in header
    assert header.endswith("\n")


def test_numpy_can_read_our_files(tmp_path) -> None:
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = str(tmp_path / "t.npy")
    npyio.save_tensor(path, arr)
    assert np.array_equal(np.load(path), arr)


def test_we_can_read_numpy_files(tmp_path) -> None:
    arr = np.arange(24, dtype=np.float32).reshape(4, 3, 2)
    path = str(tmp_path / "t.npy")
    np.save(path, arr)
    assert np.array_equal(npyio.load_tensor(path), arr)


def test_bad_magic_is_format_error(tmp_path) -> None:
    path = tmp_path / "bad.npy"
    path.write_bytes(b"NOTNPY\x01\x00" + b"\x00" * 64)
    with pytest.raises(FormatError):
        npyio.load_tensor(str(path))


def test_version_2_is_rejected(tmp_path) -> None:
    arr = np.zeros((2, 2, 2), dtype=np.float32)
    good = npyio.write_tensor_bytes(arr)
    bad = good[:6] + b"\x02\x00" + good[8:]
    with pytest.raises(FormatError):
        npyio.read_tensor_bytes(bad)


def test_wrong_dtype_is_format_error(tmp_path) -> None:
    path = str(tmp_path / "t.npy")
    np.save(path, np.zeros((2, 2, 2), dtype=np.float64))
    with pytest.raises(FormatError):
        npyio.load_tensor(path)


def test_non_3d_is_shape_error(tmp_path) -> None:
    path = str(tmp_path / "t.npy")
    np.save(path, np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(ShapeError):
        npyio.load_tensor(path)
    with pytest.raises(ShapeError):
        npyio.write_tensor_bytes(np.zeros((4, 4)))


def test_nan_payload_is_value_error(tmp_path) -> None:
    arr = np.zeros((2, 2, 1), dtype=np.float32)
    good = npyio.write_tensor_bytes(arr)
    bad = good[:-16] + struct.pack("<4f", np.nan, 0, 0, np.inf)
    with pytest.raises(ValueError):
        npyio.read_tensor_bytes(bad)
    with pytest.raises(ValueError):
        npyio.write_tensor_bytes(np.array([[[np.nan]]]))


def test_truncated_payload_is_format_error() -> None:
    good = npyio.write_tensor_bytes(np.zeros((2, 2, 1), dtype=np.float32))
    with pytest.raises(FormatError):
        npyio.read_tensor_bytes(good[:-4])
