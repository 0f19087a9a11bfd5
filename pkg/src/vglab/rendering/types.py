"""Core value types shared by every renderer."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


class GridKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass
class VoxelGrid:
    """V^3 occupancy field over the cube [-0.5, 0.5]^3, indexed [x, y, z].

    Continuous grids hold values in [0, 1]; binary grids in {0, 1}.
    Memory order is C-contiguous with z fastest.
    """

    values: np.ndarray
    kind: GridKind

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or len(set(v.shape)) != 1 or v.shape[0] < 1:
            raise ShapeError(f"voxel grid must be cubic and non-empty, got {v.shape}")
        if not np.isfinite(v).all():
            raise ShapeError("voxel grid contains non-finite values")
        if self.kind is GridKind.BINARY:
            if not np.isin(v, (0, 1)).all():
                raise ShapeError("binary grid has values outside {0, 1}")
        else:
            if v.min() < 0.0 or v.max() > 1.0:
                raise ShapeError("continuous grid has values outside [0, 1]")
        self.values = v

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def as_continuous(self) -> "VoxelGrid":
        if self.kind is GridKind.CONTINUOUS:
            return self
        return VoxelGrid(self.values.astype(self.values.dtype), GridKind.CONTINUOUS)

    @classmethod
    def binary(cls, values) -> "VoxelGrid":
        return cls(np.asarray(values), GridKind.BINARY)

    @classmethod
    def continuous(cls, values) -> "VoxelGrid":
        return cls(np.asarray(values), GridKind.CONTINUOUS)


def canonical_azimuth(az_deg: float) -> float:
    az = math.fmod(float(az_deg), 360.0)
    return az + 360.0 if az < 0 else az


@dataclass(frozen=True)
class Viewpoint:
    """Orbit pose: the camera circles the grid center and always faces it.

    The two beam lights are a pure function of the pose: both sit 45
    degrees below the camera, one 45 degrees to its left and one to its
    right.  Azimuth is canonicalized into [0, 360).
    """

    azimuth_deg: float
    elevation_deg: float
    distance: float = 2.5

    def __post_init__(self):
        object.__setattr__(self, "azimuth_deg", canonical_azimuth(self.azimuth_deg))
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ShapeError(f"elevation {self.elevation_deg} outside [-90, 90]")
        if self.distance <= 0.5 * math.sqrt(3):
            raise ShapeError("camera distance places the eye inside the grid")

    def light_directions(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors pointing from the surface toward each light."""
        return (
            _orbit_direction(self.azimuth_deg + 45.0, self.elevation_deg - 45.0),
            _orbit_direction(self.azimuth_deg - 45.0, self.elevation_deg - 45.0),
        )


def _orbit_direction(az_deg: float, el_deg: float) -> np.ndarray:
    az = math.radians(canonical_azimuth(az_deg))
    el = math.radians(el_deg)
    return np.array([math.cos(el) * math.cos(az),
                     math.cos(el) * math.sin(az),
                     math.sin(el)], dtype=np.float64)


@dataclass
class ImageBuf:
    """H x W radiance field in [0, 1]; 1 channel shaded/silhouette, 3 for normals."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim == 2:
            pass
        elif p.ndim == 3 and p.shape[2] == 3:
            pass
        else:
            raise ShapeError(f"image must be (H, W) or (H, W, 3), got {p.shape}")
        if not np.isfinite(p).all():
            raise ShapeError("image contains non-finite pixels")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ShapeError("image pixels outside [0, 1]")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3
