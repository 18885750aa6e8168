"""Flat binary parameter checkpoints.

Layout: magic b"ODM1", version u32. Then one record per parameter, in
ascending name order: name length u32, UTF-8 name, rank u32, extents as
u64 each, then the raw little-endian float64 payload in row-major order.
All integers little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ODM1"
VERSION = 1


def save_arrays(path, arrays: dict) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype=np.float64)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.astype("<f8", copy=False).tobytes())


def load_arrays(path) -> dict:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 8
    out = {}
    while off < len(blob):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}Q", blob, off)
        off += 8 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        if name in out:
            raise ValueError(f"duplicate record '{name}'")
        out[name] = arr.astype(np.float64)
    return out
