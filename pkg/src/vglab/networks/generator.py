"""Voxel generator: latent vector to continuous occupancy grid."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeError
from .layers import ConvSpec, Module, gaussian_init, lrelu


class GeneratorNet(Module):
    """Linear seed into a 4^3 volume, transposed-conv stages doubling the
    side until the target resolution, then a sigmoid occupancy head.
    """

    def __init__(self, latent_dim: int = 64, grid: int = 16,
                 widths: tuple[int, ...] = (24, 12, 6), seed: int = 0,
                 dtype=np.float32):
        super().__init__()
        n_stages = int(np.log2(grid / 4))
        if 4 * 2 ** n_stages != grid:
            raise ShapeError(f"grid resolution {grid} is not 4 * 2^k")
        if len(widths) != n_stages + 1:
            raise ShapeError(f"need {n_stages + 1} stage widths for grid {grid}, got {widths}")
        self.latent_dim = latent_dim
        self.grid = grid
        self.widths = tuple(widths)
        rng = np.random.default_rng(seed)
        self.fc_w = self._add_param("fc.w", gaussian_init(rng, (latent_dim, 64 * widths[0]), dtype=dtype))
        self.fc_b = self._add_param("fc.b", np.zeros(64 * widths[0], dtype=dtype))
        self.stages = [
            ConvSpec(self, rng, f"up{i}", (4, 4, 4), widths[i], widths[i + 1],
                     stride=2, padding=1, transposed=True, dtype=dtype)
            for i in range(n_stages)
        ]
        self.head = ConvSpec(self, rng, "head", (3, 3, 3), widths[-1], 1, padding=1, dtype=dtype)

    def forward(self, z: Tensor) -> Tensor:
        """(N, latent_dim) -> (N, V, V, V) occupancy in [0, 1]."""
        if z.data.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError(f"latent batch must be (N, {self.latent_dim}), got {z.shape}")
        n = z.shape[0]
        h = lrelu(ad.reshape(z @ self.fc_w + self.fc_b, (n, 4, 4, 4, self.widths[0])))
        for stage in self.stages:
            h = lrelu(stage(h))
        v = self.grid
        return ad.reshape(ad.sigmoid(self.head(h)), (n, v, v, v))

    __call__ = forward

    def sample_latents(self, n: int, rng: np.random.Generator) -> Tensor:
        return Tensor(rng.standard_normal((n, self.latent_dim)), dtype=np.float32
                      if self._params["fc.w"].dtype == np.float32 else np.float64)
