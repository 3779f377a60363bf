"""Strict reader/writer for the on-disk tensor format.

Files are NPY version 1.0 holding exactly one C-contiguous little-endian
float32 array of rank 3 (height, width, channels).  Anything else (other
dtypes, other ranks, format version 2.0, Fortran order, NaN/Inf payloads)
is rejected instead of silently converted, so every tensor that crosses a
tool boundary is known to be in this one dialect.
"""

from __future__ import annotations

import ast
import io
import struct

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
ALIGN = 64


def _build_header(shape: tuple[int, int, int]) -> bytes:
    dict_src = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % (
        repr(tuple(int(s) for s in shape)),
    )
    base = len(MAGIC) + len(VERSION) + 2
    pad = ALIGN - (base + len(dict_src) + 1) % ALIGN
    if pad == ALIGN:
        pad = 0
    header = dict_src.encode("latin1") + b" " * pad + b"\n"
    return MAGIC + VERSION + struct.pack("<H", len(header)) + header


def write_tensor_bytes(data: np.ndarray) -> bytes:
    """Serialize a (h, w, c) float array to NPY 1.0 bytes.

    Input may be any float dtype; it is stored as little-endian float32.
    Raises ShapeError for non-3-D input and ValueError for NaN/Inf.
    """
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise ShapeError("tensor must be 3-D (h, w, c), got %d-D" % arr.ndim)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return _build_header(arr.shape) + arr.tobytes(order="C")


def save_tensor(path: str, data: np.ndarray) -> None:
    """Write a (h, w, c) float32 tensor file at ``path``."""
    payload = write_tensor_bytes(data)
    with open(path, "wb") as fh:
        fh.write(payload)


def _parse_header(fh: io.BufferedIOBase) -> tuple[int, int, int]:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise FormatError("bad magic %r, not an NPY file" % magic)
    version = fh.read(2)
    if version != VERSION:
        raise FormatError(
            "unsupported NPY version %r, only 1.0 is accepted" % version
        )
    raw_len = fh.read(2)
    if len(raw_len) != 2:
        raise FormatError("truncated header length field")
    (hlen,) = struct.unpack("<H", raw_len)
    raw = fh.read(hlen)
    if len(raw) != hlen:
        raise FormatError("truncated header")
    try:
        meta = ast.literal_eval(raw.decode("latin1").strip())
    except (ValueError, SyntaxError) as exc:
        raise FormatError("unparseable header: %s" % exc) from exc
    if not isinstance(meta, dict) or set(meta) != {
        "descr",
        "fortran_order",
        "shape",
    }:
        raise FormatError("header keys %r do not match the NPY dict" % meta)
    if meta["descr"] != "<f4":
        raise FormatError(
            "dtype %r not supported, tensors are '<f4'" % meta["descr"]
        )
    if meta["fortran_order"] is not False:
        raise FormatError("Fortran-ordered tensors are not supported")
    shape = meta["shape"]
    if not (
        isinstance(shape, tuple)
        and all(isinstance(s, int) and s > 0 for s in shape)
    ):
        raise FormatError("malformed shape entry %r" % (shape,))
    if len(shape) != 3:
        raise ShapeError(
            "tensor must be 3-D (h, w, c), file holds %d-D" % len(shape)
        )
    return shape  # type: ignore[return-value]


def read_tensor_bytes(payload: bytes) -> np.ndarray:
    """Parse NPY 1.0 bytes into a (h, w, c) float32 array."""
    fh = io.BytesIO(payload)
    shape = _parse_header(fh)
    count = shape[0] * shape[1] * shape[2]
    body = fh.read()
    if len(body) != count * 4:
        raise FormatError(
            "payload holds %d bytes, shape %r needs %d"
            % (len(body), shape, count * 4)
        )
    arr = np.frombuffer(body, dtype="<f4").reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    return np.ascontiguousarray(arr)


def load_tensor(path: str) -> np.ndarray:
    """Read a tensor file written by :func:`save_tensor`."""
    with open(path, "rb") as fh:
        payload = fh.read()
    return read_tensor_bytes(payload)
