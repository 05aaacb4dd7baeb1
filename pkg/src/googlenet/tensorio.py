"""Raw NCHW tensor fixture files.

Layout (all little-endian):

    magic   4 bytes  b"NCHW"
    version u32      1
    extents 4 * u32  batch, channels, height, width
    dtype   u8       0 = fp32, 1 = fp64
    data    extents product * itemsize bytes, row-major
"""

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"NCHW"
VERSION = 1

_HEADER = struct.Struct("<4sI4IB")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def validate_tensor(arr):
    """Check the rank-4 activation contract: 4 extents, all >= 1, fp32/fp64."""
    arr = np.asarray(arr)
    if arr.ndim != 4:
        raise FormatError(f"tensor must be rank 4, got rank {arr.ndim}")
    if min(arr.shape) < 1:
        raise FormatError(f"tensor extents must all be >= 1, got {arr.shape}")
    if arr.dtype not in _TAGS:
        raise FormatError(f"tensor dtype must be fp32 or fp64, got {arr.dtype}")
    return arr


def write_tensor(path, arr):
    arr = validate_tensor(arr)
    header = _HEADER.pack(MAGIC, VERSION, *arr.shape, _TAGS[arr.dtype])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def read_tensor(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, b, c, h, w, tag = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if tag not in _DTYPES:
            raise FormatError(f"{path}: unknown dtype tag {tag}")
        if min(b, c, h, w) < 1:
            raise FormatError(f"{path}: extents must be >= 1, got {(b, c, h, w)}")
        dtype = _DTYPES[tag]
        n = b * c * h * w
        data = fh.read(n * dtype.itemsize + 1)
    if len(data) != n * dtype.itemsize:
        raise FormatError(f"{path}: data length {len(data)} != expected {n * dtype.itemsize}")
    out = np.frombuffer(data, dtype=dtype).reshape(b, c, h, w)
    return out.astype(np.float32 if tag == 0 else np.float64)
