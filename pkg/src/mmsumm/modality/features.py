"""Binary feature-file container.

Layout (little-endian)::

    b"FLRT" | version u32 | rank u32 | dims u32 * rank | payload

Version 1 stores float32 values, row-major. Version 2 is the same layout with
float64 values; checkpoints use it so a resumed run sees exactly the weights it
saved.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from mmsumm.errors import FormatError, NumericError

MAGIC = b"FLRT"
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def encode_features(array, version=1) -> bytes:
    if version not in DTYPES:
        raise FormatError(f"unsupported feature-file version {version}")
    arr = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError("refusing to write non-finite features")
    header = MAGIC + struct.pack("<II", version, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=DTYPES[version]).tobytes()


def decode_features(buf: bytes, source="<bytes>") -> np.ndarray:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic, not a feature file")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version not in DTYPES:
        raise FormatError(f"{source}: unsupported version {version}")
    offset = 12 + 4 * rank
    if len(buf) < offset:
        raise FormatError(f"{source}: header truncated")
    dims = struct.unpack_from(f"<{rank}I", buf, 12)
    dtype = DTYPES[version]
    expected = dtype.itemsize * int(np.prod(dims, dtype=np.int64))
    actual = len(buf) - offset
    if actual != expected:
        raise FormatError(
            f"{source}: payload has {actual} bytes, expected {expected} for dims {list(dims)}"
        )
    data = np.frombuffer(buf, dtype=dtype, count=expected // dtype.itemsize, offset=offset)
    return data.reshape(dims).astype(np.float64)


def write_feature_file(path, array, version=1):
    data = encode_features(array, version)
    with open(path, "wb") as fh:
        fh.write(data)


def read_feature_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    return decode_features(buf, source=os.fspath(path))
