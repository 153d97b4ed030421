"""Event file I/O: the EVT0 binary container plus a CSV reader for fixtures.

EVT0 layout, all little-endian:
    16-byte header: magic b"EVT0", uint16 width, uint16 height,
                    uint32 reserved (zero), uint32 count
    then `count` packed records: uint16 x, uint16 y, int64 t_us, int8 p
"""

from __future__ import annotations

import os
import struct
from typing import Union

import numpy as np

from .types import EventStream, InputError

_MAGIC = b"EVT0"
_HEADER = struct.Struct("<4sHHII")
_RECORD_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<i8"), ("p", "i1")])


def write_events(path: Union[str, os.PathLike], stream: EventStream) -> None:
    n = len(stream)
    if np.any(stream.x >= 2**16) or np.any(stream.y >= 2**16):
        raise InputError("EVT0 stores coordinates as uint16")
    rec = np.empty(n, dtype=_RECORD_DTYPE)
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["t"] = stream.t
    rec["p"] = stream.p
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, stream.width, stream.height, 0, n))
        f.write(rec.tobytes())


def read_events(
    path: Union[str, os.PathLike], t_start: int = None, t_end: int = None
) -> EventStream:
    """Read an EVT0 file. Window bounds default to (min(t)-1, max(t))."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise InputError(f"truncated EVT0 header in {path}")
        magic, width, height, _reserved, count = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise InputError(f"bad magic {magic!r} in {path}")
        body = f.read(count * _RECORD_DTYPE.itemsize)
    if len(body) != count * _RECORD_DTYPE.itemsize:
        raise InputError(f"truncated EVT0 body in {path}")
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    t = rec["t"].astype(np.int64)
    if t_start is None:
        t_start = int(t.min()) - 1 if count else 0
    if t_end is None:
        t_end = int(t.max()) if count else t_start + 1
    return EventStream(
        rec["x"].astype(np.int64), rec["y"].astype(np.int64), t,
        rec["p"].astype(np.int64), t_start, t_end, width, height,
    )


def read_events_csv(
    path: Union[str, os.PathLike], width: int, height: int,
    t_start: int = None, t_end: int = None,
) -> EventStream:
    """Plain-text fixture reader: one "x,y,t,p" line per event."""
    data = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 4), dtype=np.int64)
    if data.shape[1] != 4:
        raise InputError(f"expected 4 columns (x,y,t,p), got {data.shape[1]}")
    x, y, t, p = data[:, 0], data[:, 1], data[:, 2], data[:, 3]
    if t_start is None:
        t_start = int(t.min()) - 1 if len(t) else 0
    if t_end is None:
        t_end = int(t.max()) if len(t) else t_start + 1
    return EventStream(x, y, t, p, t_start, t_end, width, height)
