"""Versioned binary container for named float32 arrays.

Used for network weight files and for dataset sample records. Layout
(all integers little-endian uint32):

    magic  b"DHZW"
    format version
    entry count
    per entry: name length, name bytes (utf-8), ndim, dims..., raw
    float32 payload in C order (little-endian)

Round trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"DHZW"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")


def write_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays to ``path``. All values are stored as float32."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_U32.pack(FORMAT_VERSION))
        f.write(_U32.pack(len(arrays)))
        for name, arr in arrays.items():
            a = np.asarray(arr, dtype="<f4")  # tobytes() serializes C order
            raw_name = name.encode("utf-8")
            f.write(_U32.pack(len(raw_name)))
            f.write(raw_name)
            f.write(_U32.pack(a.ndim))
            for d in a.shape:
                f.write(_U32.pack(d))
            f.write(a.tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError("truncated container file")
    return buf


def read_arrays(path) -> dict[str, np.ndarray]:
    """Read a container written by :func:`write_arrays`."""
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise ValueError(f"not a DHZW container: {path}")
        (version,) = _U32.unpack(_read_exact(f, 4))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported container version {version}")
        (count,) = _U32.unpack(_read_exact(f, 4))
        for _ in range(count):
            (name_len,) = _U32.unpack(_read_exact(f, 4))
            name = _read_exact(f, name_len).decode("utf-8")
            (ndim,) = _U32.unpack(_read_exact(f, 4))
            dims = [_U32.unpack(_read_exact(f, 4))[0] for _ in range(ndim)]
            n_items = int(np.prod(dims, dtype=np.int64)) if dims else 1
            payload = _read_exact(f, 4 * n_items)
            arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
            out[name] = arr.astype(np.float32, copy=True)
    return out
