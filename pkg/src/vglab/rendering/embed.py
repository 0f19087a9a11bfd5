"""Camera-aligned rigid-body embedding of voxel grids.

The pose rotation is folded into a single trilinear resample onto a
grid of twice the side (same voxel pitch, zero outside the source), so
any rotated source always fits.  Output axes are (row, col, depth) in
the camera frame, matching rendered image orientation; collapsing depth
into channels later is then a plain reshape.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .camera import embed_rotation
from .types import Viewpoint, VoxelGrid


def rotate_embed(grid: VoxelGrid | Tensor, views: Viewpoint | list[Viewpoint]) -> Tensor:
    """Resample (N, V, V, V) grids into camera-aligned (N, 2V, 2V, 2V) tensors.

    Binary grids are promoted to continuous values.  Accepts a single
    VoxelGrid with one view, or a batched tensor with one view per item.
    """
    if isinstance(grid, VoxelGrid):
        g = Tensor(grid.as_continuous().values[None])
    else:
        g = grid if grid.data.ndim == 4 else ad.reshape(grid, (1,) + grid.shape)
    view_list = views if isinstance(views, list) else [views]
    rots = np.stack([embed_rotation(v) for v in view_list])
    return ad.grid_resample_trilinear(g, rots, out_side=2 * g.shape[1])


class EmbedPlan:
    """Reusable pose plan: one trilinear sampling layout for a view batch.

    Within one training step the same views embed several grids; building
    the corner plan once and replaying it keeps that cheap.
    """

    def __init__(self, views: list[Viewpoint], grid_side: int, dtype=np.float32):
        from ..autodiff import _kernels as K

        self.v = grid_side
        self.out_side = 2 * grid_side
        rots = np.stack([embed_rotation(v) for v in views])
        self.active = K.inside_sphere_mask(grid_side, self.out_side)
        self.idx, self.wgt = K.resample_plan_batch(
            grid_side, self.out_side, rots, np.zeros((len(views), 3)), np.dtype(dtype),
            active=self.active)

    def __call__(self, grids: Tensor) -> Tensor:
        from ..autodiff.ops import fixed_scatter, weighted_gather

        n, v = grids.shape[0], self.v
        if grids.shape != (n, v, v, v) or n != self.idx.shape[1]:
            raise ValueError(f"plan built for {self.idx.shape[1]} x {v}^3 grids, got {grids.shape}")
        ring = ad.pad(grids, [(0, 0), (1, 1), (1, 1), (1, 1)])
        flat = ad.reshape(ring, (n, (v + 2) ** 3))
        got = weighted_gather(flat, self.idx, self.wgt)
        out = fixed_scatter(got, self.active, self.out_side ** 3)
        return ad.reshape(out, (n, self.out_side, self.out_side, self.out_side))
