"""Deterministic binary checkpoint container.

Byte-stable serialization of named arrays plus a JSON metadata block: the same
logical content always produces the same file bytes (arrays written in sorted
name order, JSON with sorted keys). Layout, little-endian throughout:

    magic bytes (container-specific, e.g. b"ESCDICT1")
    uint64 metadata length, then compact sorted-keys JSON (utf-8)
    uint32 array count
    per array: uint16 name length, name utf-8,
               uint16 dtype-string length, dtype string (e.g. "<f8"),
               uint8 ndim, ndim x uint64 shape, raw C-order data bytes
"""

from __future__ import annotations

import json
import os
import struct
from typing import Dict, Tuple, Union

import numpy as np

from .events.types import InputError

MAGIC_DICT = b"ESCDICT1"
MAGIC_SEG = b"ESCSEG1"


def save_arrays(path: Union[str, os.PathLike], magic: bytes,
                meta: dict, arrays: Dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += magic
    meta_b = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    blob += struct.pack("<Q", len(meta_b))
    blob += meta_b
    blob += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        name_b = name.encode()
        dt = arr.dtype.newbyteorder("<")
        dt_b = dt.str.encode()
        blob += struct.pack("<H", len(name_b)) + name_b
        blob += struct.pack("<H", len(dt_b)) + dt_b
        blob += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            blob += struct.pack("<Q", dim)
        blob += arr.astype(dt, copy=False).tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


def load_arrays(path: Union[str, os.PathLike],
                magic: bytes) -> Tuple[dict, Dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(magic):
        raise InputError(f"bad checkpoint magic in {path} (want {magic!r})")
    off = len(magic)

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise InputError(f"truncated checkpoint {path}")
        chunk = raw[off:off + n]
        off += n
        return chunk

    (meta_len,) = struct.unpack("<Q", take(8))
    meta = json.loads(take(meta_len).decode())
    (count,) = struct.unpack("<I", take(4))
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (dt_len,) = struct.unpack("<H", take(2))
        dt = np.dtype(take(dt_len).decode())
        (ndim,) = struct.unpack("<B", take(1))
        shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(ndim))
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize if ndim else dt.itemsize
        arrays[name] = np.frombuffer(take(n_bytes), dtype=dt).reshape(shape).copy()
    if off != len(raw):
        raise InputError(f"trailing bytes in checkpoint {path}")
    return meta, arrays
