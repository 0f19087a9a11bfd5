"""Proxy neural renderer: a differentiable stand-in for the ray caster.

Consumes camera-aligned embedded volumes of side 2V (see rotate_embed)
whose axes are (row, col, depth).  A strided 3D stage condenses the
volume, the projection unit folds the depth axis into channels, and a
2D residual stage with an upsampling head emits the image.  Because
depth is the last spatial axis, the projection is a plain reshape.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeError
from ..rendering import Viewpoint, VoxelGrid, rotate_embed
from .layers import ConvSpec, Module, ResBlock, lrelu


class ProxyRendererNet(Module):
    def __init__(self, grid: int = 16, width3d: int = 4, width2d: int = 16,
                 head_width: int = 8, stem_kernel: int = 2, seed: int = 0,
                 dtype=np.float32):
        super().__init__()
        self.grid = grid
        self.in_side = 2 * grid
        self.image_size = 2 * grid
        self.width3d = width3d
        self.width2d = width2d
        rng = np.random.default_rng(seed)
        if stem_kernel == 2:
            self.stem = ConvSpec(self, rng, "stem", (2, 2, 2), 1, width3d, stride=2, dtype=dtype)
        elif stem_kernel == 4:
            self.stem = ConvSpec(self, rng, "stem", (4, 4, 4), 1, width3d, stride=2, padding=1, dtype=dtype)
        else:
            raise ShapeError(f"stem kernel must be 2 or 4, got {stem_kernel}")
        self.res3d = [ResBlock(self, rng, f"r3.{i}", width3d, nd=3, dtype=dtype) for i in range(2)]
        self.project = ConvSpec(self, rng, "proj", (1, 1), grid * width3d, width2d, dtype=dtype)
        self.res2d = [ResBlock(self, rng, f"r2.{i}", width2d, nd=2, dtype=dtype) for i in range(4)]
        self.head1 = ConvSpec(self, rng, "head1", (3, 3), width2d, head_width, padding=1, dtype=dtype)
        self.head2 = ConvSpec(self, rng, "head2", (3, 3), head_width, 1, padding=1, dtype=dtype)

    def forward(self, embedded: Tensor) -> Tensor:
        """(N, 2V, 2V, 2V) camera-aligned volume -> (N, 2V, 2V) image in [0, 1]."""
        s = self.in_side
        if embedded.data.ndim != 4 or embedded.shape[1:] != (s, s, s):
            raise ShapeError(f"expected (N, {s}, {s}, {s}) embedded volume, got {embedded.shape}")
        n = embedded.shape[0]
        h = ad.reshape(embedded, (n, s, s, s, 1))
        h = lrelu(self.stem(h))
        for block in self.res3d:
            h = block(h)
        # depth-to-channel collapse: (N, V, V, depth, C) -> (N, V, V, depth*C)
        v = self.grid
        h = ad.reshape(h, (n, v, v, v * self.width3d))
        h = lrelu(self.project(h))
        for block in self.res2d:
            h = block(h)
        h = ad.nearest_upsample(h, 2)
        h = lrelu(self.head1(h))
        return ad.reshape(ad.sigmoid(self.head2(h)), (n, 2 * v, 2 * v))

    __call__ = forward

    def render(self, grid: VoxelGrid | Tensor, views: Viewpoint | list[Viewpoint]) -> Tensor:
        """Differentiable end to end: pose embedding then the network."""
        return self.forward(rotate_embed(grid, views))


def neural_render(net: ProxyRendererNet, grid: VoxelGrid | Tensor,
                  views: Viewpoint | list[Viewpoint]) -> Tensor:
    return net.render(grid, views)
