"""Minimal binary cube container.

Layout (all integers little-endian):

====================  ======  =====================================
bytes 0..3            magic   ``HSIC``
bytes 4..5            u16     format version, currently 1
byte 6                u8      dtype code: 0 = float32 LE, 1 = float64 LE
byte 7                u8      reserved, must be 0
bytes 8..11           u32     H (rows)
bytes 12..15          u32     W (columns)
bytes 16..19          u32     C (bands)
bytes 20..            data    H*W*C values, band-major, row then column
====================  ======  =====================================

Masks and measurements are stored with C = 1.  Writes go through a
temporary file and an atomic rename.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import CubeFileError

MAGIC = b"HSIC"
VERSION = 1
HEADER_SIZE = 20

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {"f32": 0, "f64": 1}


def write_cube(path: str | os.PathLike, data: np.ndarray, dtype: str = "f64") -> None:
    """Write a (C, H, W) or (H, W) array; 2-D input is stored with C = 1."""
    if dtype not in _CODES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
    code = _CODES[dtype]
    c, h, w = arr.shape
    header = MAGIC + struct.pack("<HBBIII", VERSION, code, 0, h, w, c)
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_cube(path: str | os.PathLike) -> tuple[np.ndarray, str]:
    """Read a cube file; returns (float64 (C, H, W) array, stored dtype name).

    Raises CubeFileError with the byte offset of the first malformed field.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise CubeFileError(
            f"{path}: truncated header, {len(raw)} bytes at byte offset 0"
        )
    if raw[:4] != MAGIC:
        raise CubeFileError(f"{path}: bad magic {raw[:4]!r} at byte offset 0")
    version, code, reserved, h, w, c = struct.unpack("<HBBIII", raw[4:HEADER_SIZE])
    if version != VERSION:
        raise CubeFileError(
            f"{path}: unsupported version {version} at byte offset 4"
        )
    if code not in _DTYPES:
        raise CubeFileError(f"{path}: unknown dtype code {code} at byte offset 6")
    if reserved != 0:
        raise CubeFileError(
            f"{path}: reserved byte is {reserved} (want 0) at byte offset 7"
        )
    if h < 1 or w < 1 or c < 1:
        raise CubeFileError(
            f"{path}: zero dimension in header (H={h}, W={w}, C={c}) "
            "at byte offset 8"
        )
    dtype = _DTYPES[code]
    expected = HEADER_SIZE + h * w * c * dtype.itemsize
    if len(raw) != expected:
        raise CubeFileError(
            f"{path}: payload length {len(raw) - HEADER_SIZE} does not match "
            f"header ({h}x{w}x{c} {dtype.name}) at byte offset {HEADER_SIZE}"
        )
    flat = np.frombuffer(raw, dtype=dtype, offset=HEADER_SIZE)
    arr = flat.reshape(c, h, w).astype(np.float64)
    name = "f32" if code == 0 else "f64"
    return arr, name


def write_pgm(path: str | os.PathLike, plane: np.ndarray) -> None:
    """Export one band as an 8-bit binary portable graymap (clamped to [0, 1])."""
    arr = np.clip(np.asarray(plane, dtype=np.float64), 0.0, 1.0)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D plane, got shape {arr.shape}")
    h, w = arr.shape
    body = np.round(arr * 255.0).astype(np.uint8).tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
