"""Flat binary parameter checkpoints.

Format (all integers little-endian):

    magic     4 bytes  "VGL1"
    meta_len  u32      length of the UTF-8 JSON metadata blob
    meta      bytes    run metadata (config snapshot, step, rng, ...)
    n_records u64
    record*   u32 name_len | name bytes | u32 rank | rank x u64 dims
              | prod(dims) x f32 values

Values are always stored as 32-bit floats; training tensors are float32
so a save/load round-trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataFormatError

MAGIC = b"VGL1"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    meta_blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(meta_blob)))
        f.write(meta_blob)
        f.write(struct.pack("<Q", len(arrays)))
        for name, arr in arrays.items():
            blob = name.encode("utf-8")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    pos = 4
    (meta_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    meta = json.loads(raw[pos:pos + meta_len].decode("utf-8"))
    pos += meta_len
    (n_records,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_records):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", raw, pos)
        pos += 8 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        arrays[name] = arr.copy()
    if pos != len(raw):
        raise DataFormatError(f"{path}: {len(raw) - pos} trailing bytes")
    return arrays, meta
