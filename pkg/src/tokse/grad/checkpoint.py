"""Versioned binary checkpoint: named tensors plus a small string-keyed meta dict.

Layout (all integers little-endian):
    magic   8 bytes  b"TOKSECK1"
    version u32
    meta    u32 length + UTF-8 JSON object (string keys and values)
    count   u32
    per tensor, sorted by name:
      name  u32 length + UTF-8
      dtype u32 length + UTF-8 numpy dtype string with explicit byte order
      ndim  u32, then u64 per dimension
      payload: raw little-endian array bytes, C order

Writers sort tensors by name and normalize dtypes, so identical arrays
produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TOKSECK1"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _le_dtype(arr: np.ndarray) -> np.ndarray:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    if dt.byteorder == "=":
        dt = dt.newbyteorder("<")
    return np.ascontiguousarray(arr, dtype=dt)


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    meta_bytes = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks.append(struct.pack("<I", len(meta_bytes)))
    chunks.append(meta_bytes)
    chunks.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = _le_dtype(np.asarray(tensors[name]))
        name_b = name.encode("utf-8")
        dtype_b = arr.dtype.str.encode("ascii")
        chunks.append(struct.pack("<I", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<I", len(dtype_b)))
        chunks.append(dtype_b)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.tobytes(order="C"))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.off: self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path):
    """Returns (tensors dict, meta dict)."""
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    if r.take(8) != MAGIC:
        raise CheckpointError(f"{path}: bad magic; not a checkpoint file")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    count = r.u32()
    tensors = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        dtype = np.dtype(r.take(r.u32()).decode("ascii"))
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}Q", r.take(8 * ndim)) if ndim else ()
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
        arr = np.frombuffer(r.take(n_bytes), dtype=dtype).reshape(shape).copy()
        tensors[name] = arr
    if r.off != len(r.blob):
        raise CheckpointError(f"{path}: {len(r.blob) - r.off} trailing bytes")
    return tensors, meta
