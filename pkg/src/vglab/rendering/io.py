"""PNG images and VOX1 voxel-grid files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataFormatError
from .types import GridKind, ImageBuf, VoxelGrid

VOX_MAGIC = b"VOX1"


def write_png(image: ImageBuf, path) -> None:
    arr = np.round(np.asarray(image.pixels) * 255.0).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def read_png(path) -> ImageBuf:
    img = Image.open(path)
    arr = np.asarray(img).astype(np.float64) / 255.0
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return ImageBuf(arr)


def write_vox(grid: VoxelGrid, path) -> None:
    """Magic "VOX1", side as u64 LE, then V^3 f32 LE values, z fastest."""
    v = grid.resolution
    with open(path, "wb") as f:
        f.write(VOX_MAGIC)
        f.write(struct.pack("<Q", v))
        f.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def read_vox(path) -> VoxelGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != VOX_MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}, expected {VOX_MAGIC!r}")
    (v,) = struct.unpack_from("<Q", raw, 4)
    want = 12 + 4 * v ** 3
    if len(raw) != want:
        raise DataFormatError(f"{path}: expected {want} bytes for side {v}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", count=v ** 3, offset=12).reshape(v, v, v).copy()
    kind = GridKind.BINARY if np.isin(values, (0, 1)).all() else GridKind.CONTINUOUS
    return VoxelGrid(values, kind)
