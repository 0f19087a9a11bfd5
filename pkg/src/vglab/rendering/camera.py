"""Perspective camera shared by every renderer.

World frame: the grid fills [-0.5, 0.5]^3, +z is up.  A pose with
azimuth a and elevation e puts the eye at distance*d(a, e) where
d = (cos e cos a, cos e sin a, sin e); the camera looks at the origin.
Vertical field of view is fixed at 35 degrees, one ray per pixel
through the pixel center.
"""

from __future__ import annotations

import math

import numpy as np

from .types import Viewpoint, _orbit_direction

FOV_DEG = 35.0
AMBIENT = 0.15
DIFFUSE = 0.85  # split equally across the two lights

_WORLD_UP = np.array([0.0, 0.0, 1.0])


def camera_frame(view: Viewpoint) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (eye, right, up, forward); forward points at the grid center."""
    outward = _orbit_direction(view.azimuth_deg, view.elevation_deg)
    eye = view.distance * outward
    fwd = -outward
    side = np.cross(fwd, _WORLD_UP)
    nrm = np.linalg.norm(side)
    if nrm < 1e-9:  # looking straight up/down; pick a stable fallback
        side = np.array([1.0, 0.0, 0.0])
        nrm = 1.0
    right = side / nrm
    up = np.cross(right, fwd)
    return eye, right, up, fwd


def pixel_rays(view: Viewpoint, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Ray origins (3,) and unit directions (H*W, 3), row-major pixels."""
    eye, right, up, fwd = camera_frame(view)
    tanf = math.tan(math.radians(FOV_DEG) / 2.0)
    cols = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * tanf
    rows = (1.0 - 2.0 * (np.arange(height) + 0.5) / height) * tanf
    dirs = (fwd[None, None, :]
            + cols[None, :, None] * right[None, None, :]
            + rows[:, None, None] * up[None, None, :])
    dirs = dirs.reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return eye, dirs


def embed_rotation(view: Viewpoint) -> np.ndarray:
    """Pose matrix for camera-aligned resampling.

    Output grid axes are (row, col, depth) = (-up, right, forward), so a
    resampled volume lines up with rendered images: rows go down the
    image, columns to the right, depth into the scene.  Columns of the
    returned matrix map output coordinates into world space.
    """
    _, right, up, fwd = camera_frame(view)
    return np.stack([-up, right, fwd], axis=1)


def aabb_entry(eye: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slab test against [-0.5, 0.5]^3.

    Returns (t_enter, hit_mask, entry_axis); t_enter is +inf for misses.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    lo = (-0.5 - eye)[None, :] * inv
    hi = (0.5 - eye)[None, :] * inv
    near = np.minimum(lo, hi)
    far = np.maximum(lo, hi)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    t_enter = near.max(axis=1)
    t_exit = far.min(axis=1)
    hit = (t_enter <= t_exit) & (t_exit > 0.0)
    axis = near.argmax(axis=1)
    return np.where(hit, t_enter, np.inf), hit, axis
