"""Tensor container I/O.

Wire format (little-endian throughout): magic "RPT1", then per tensor:
u32 name length, UTF-8 name, u32 rank, rank x u32 dims, raw float32 data.
Records run to end of payload.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO, Dict, Union

import numpy as np

MAGIC = b"RPT1"


def write_tensors(fp: BinaryIO, tensors: Dict[str, np.ndarray]) -> None:
    fp.write(MAGIC)
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        fp.write(struct.pack("<I", len(raw)))
        fp.write(raw)
        arr = np.ascontiguousarray(arr, dtype="<f4")
        fp.write(struct.pack("<I", arr.ndim))
        fp.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fp.write(arr.tobytes())


def read_tensors(fp: BinaryIO) -> Dict[str, np.ndarray]:
    if fp.read(4) != MAGIC:
        raise ValueError("not a tensor container (bad magic)")
    out: Dict[str, np.ndarray] = {}
    while True:
        head = fp.read(4)
        if not head:
            return out
        (name_len,) = struct.unpack("<I", head)
        name = fp.read(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", fp.read(4))
        dims = struct.unpack(f"<{rank}I", fp.read(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(fp.read(4 * count), dtype="<f4").reshape(dims)
        out[name] = data.copy()


def save_tensors(path, tensors: Dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fp:
        write_tensors(fp, tensors)


def load_tensors(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fp:
        return read_tensors(fp)


def dump_bytes(tensors: Dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    write_tensors(buf, tensors)
    return buf.getvalue()


def load_bytes(payload: Union[bytes, bytearray]) -> Dict[str, np.ndarray]:
    return read_tensors(io.BytesIO(bytes(payload)))
