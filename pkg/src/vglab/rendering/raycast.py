"""Non-differentiable ray-casting renderer over binary voxel grids.

One ray per pixel marches the grid with the classic amortized DDA
(step to whichever axis boundary is nearest, repeat).  The first
occupied voxel wins; the shaded mode lights its entry face with two
directional beams plus an ambient floor, the normal mode emits the
camera-space entry-face normal.  Rays never resample voxels, so the
whole pass is exact, referentially transparent and lives outside the
gradient tape by construction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .camera import AMBIENT, DIFFUSE, aabb_entry, camera_frame, pixel_rays
from .types import GridKind, ImageBuf, Viewpoint, VoxelGrid

_ENTRY_NUDGE = 1e-9


def _traverse(occ_flat: np.ndarray, v: int, eyes: np.ndarray, dirs: np.ndarray,
              ray_sample: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """March every ray to its first occupied voxel.

    occ_flat: (N*V^3,) boolean occupancy; eyes/dirs: (R, 3);
    ray_sample: (R,) grid index per ray.
    Returns (hit, axis, sign): entry-face axis and its outward sign.
    """
    n_rays = dirs.shape[0]
    t_enter, inside, entry_axis = aabb_entry_rays(eyes, dirs)

    hit = np.zeros(n_rays, dtype=bool)
    axis = np.zeros(n_rays, dtype=np.int8)
    sign = np.zeros(n_rays, dtype=np.int8)

    active = inside.copy()
    if not active.any():
        return hit, axis, sign

    t0 = np.where(np.isfinite(t_enter), t_enter, 0.0)
    p = eyes + (t0[:, None] + _ENTRY_NUDGE) * dirs
    ivox = np.clip(np.floor((p + 0.5) * v).astype(np.int64), 0, v - 1)
    step = np.sign(dirs).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_delta = np.where(dirs != 0.0, 1.0 / (v * np.abs(dirs)), np.inf)
        boundary = (ivox + (step > 0)) / v - 0.5
        t_max = np.where(dirs != 0.0, (boundary - eyes) / dirs, np.inf)

    def occupied(mask):
        flat = (ivox[mask, 0] * v + ivox[mask, 1]) * v + ivox[mask, 2]
        return occ_flat[ray_sample[mask] * (v * v * v) + flat]

    # entry voxel: the face normal is the slab axis, facing back along the ray
    occ0 = np.zeros(n_rays, dtype=bool)
    occ0[active] = occupied(active)
    first = active & occ0
    hit[first] = True
    axis[first] = entry_axis[first]
    sign[first] = -step[first, entry_axis[first]].astype(np.int8)
    active &= ~first

    for _ in range(3 * v + 2):
        if not active.any():
            break
        k = np.argmin(t_max, axis=1)
        rows = np.arange(n_rays)
        ivox[rows, k] += np.where(active, step[rows, k], 0)
        outside = active & ((ivox[rows, k] < 0) | (ivox[rows, k] >= v))
        active &= ~outside
        t_max[rows, k] += np.where(active, t_delta[rows, k], 0.0)
        if not active.any():
            break
        occ = np.zeros(n_rays, dtype=bool)
        occ[active] = occupied(active)
        newly = active & occ
        hit[newly] = True
        axis[newly] = k[newly].astype(np.int8)
        sign[newly] = -step[newly, k[newly]].astype(np.int8)
        active &= ~newly
    return hit, axis, sign


def aabb_entry_rays(eyes: np.ndarray, dirs: np.ndarray):
    """Per-ray slab test where each ray may have its own origin."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        lo = (-0.5 - eyes) * inv
        hi = (0.5 - eyes) * inv
    near = np.minimum(lo, hi)
    far = np.maximum(lo, hi)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    t_enter = near.max(axis=1)
    t_exit = far.min(axis=1)
    ok = (t_enter <= t_exit) & (t_exit > 0.0)
    return np.where(ok, t_enter, np.inf), ok, near.argmax(axis=1)


def raycast_batch(grids: np.ndarray, views: list[Viewpoint], height: int, width: int,
                  mode: str = "shaded") -> np.ndarray:
    """Render many (grid, view) pairs at once; results match one-at-a-time calls.

    grids: (N, V, V, V) binary occupancy. Returns (N, H, W) for shaded
    or (N, H, W, 3) for normal maps.
    """
    grids = np.asarray(grids)
    if grids.ndim != 4:
        raise ShapeError(f"raycast_batch expects (N, V, V, V), got {grids.shape}")
    n, v = grids.shape[0], grids.shape[1]
    if len(views) != n:
        raise ShapeError(f"{n} grids vs {len(views)} views")
    occ_flat = (grids > 0.5).reshape(-1)

    r_per = height * width
    eyes = np.empty((n * r_per, 3))
    dirs = np.empty((n * r_per, 3))
    frames = []
    for i, view in enumerate(views):
        eye, d = pixel_rays(view, height, width)
        eyes[i * r_per:(i + 1) * r_per] = eye
        dirs[i * r_per:(i + 1) * r_per] = d
        frames.append(camera_frame(view))
    ray_sample = np.repeat(np.arange(n, dtype=np.int64), r_per)

    hit, axis, sign = _traverse(occ_flat, v, eyes, dirs, ray_sample)

    normals = np.zeros((n * r_per, 3))
    normals[np.arange(n * r_per), axis] = sign
    normals[~hit] = 0.0

    if mode == "shaded":
        shade = np.zeros(n * r_per)
        for i, view in enumerate(views):
            block = slice(i * r_per, (i + 1) * r_per)
            l1, l2 = view.light_directions()
            lam = (np.maximum(normals[block] @ l1, 0.0)
                   + np.maximum(normals[block] @ l2, 0.0)) * (DIFFUSE / 2.0)
            shade[block] = AMBIENT + lam
        shade = np.where(hit, np.clip(shade, 0.0, 1.0), 0.0)
        return shade.reshape(n, height, width)

    if mode == "normal":
        out = np.zeros((n * r_per, 3))
        for i, (_, right, up, fwd) in enumerate(frames):
            block = slice(i * r_per, (i + 1) * r_per)
            cam = np.stack([normals[block] @ right,
                            normals[block] @ up,
                            normals[block] @ (-fwd)], axis=1)
            out[block] = (cam + 1.0) / 2.0
        out[~hit] = 0.5  # zero vector, remapped
        return out.reshape(n, height, width, 3)

    raise ShapeError(f"unknown raycast mode '{mode}'")


def _require_binary(grid: VoxelGrid) -> None:
    if grid.kind is not GridKind.BINARY:
        raise ShapeError("the ray-casting renderer consumes binary grids only")


def raycast_render(grid: VoxelGrid, view: Viewpoint, height: int, width: int) -> ImageBuf:
    _require_binary(grid)
    img = raycast_batch(grid.values[None], [view], height, width, mode="shaded")[0]
    return ImageBuf(img)


def normal_map_render(grid: VoxelGrid, view: Viewpoint, height: int, width: int) -> ImageBuf:
    _require_binary(grid)
    img = raycast_batch(grid.values[None], [view], height, width, mode="normal")[0]
    return ImageBuf(img)
