"""Differentiable image-formation models on the gradient tape.

All three baselines pull trilinear samples along the same perspective
rays as the ray-caster: 2V samples per ray at one-voxel pitch, starting
where each ray enters the grid (rays that miss contribute zeros).
The per-ray compositing formulas are split out as small tensor
functions so they can be unit-checked and grad-checked in isolation:

  visual hull        rho = 1 - exp(-tau * sum_j v_j)
  absorption-only    rho = 1 - prod_j (1 - v_j)
  emission-absorption
      T_i = prod_{j<=i} (1 - va_j)
      rho = [sum_i va_i ve_i T_i] / [sum_i va_i T_i + eps] * (1 - T_n)
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeError
from .camera import aabb_entry, pixel_rays
from .types import GridKind, ImageBuf, Viewpoint, VoxelGrid

DEFAULT_EA_EPS = 1e-8


def default_tau(v: int) -> float:
    """Saturates a fully occupied ray (~V unit samples) near 0.98."""
    return 4.0 / v


def ray_sample_plan(view: Viewpoint, v: int, height: int, width: int,
                    dtype=np.float64, edge_clamp: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Trilinear gather plan (idx, wgt), each (H*W*S, 8) with S = 2V.

    Samples sit at one-voxel spacing along each ray over a window of two
    grid extents from the entry point; indices address a ring-padded
    (V+2)^3 grid.  With zero padding (the default, right for densities)
    out-of-range corners land in the zero ring; with ``edge_clamp``
    (right for material properties like emission) sample positions clamp
    to the boundary and the weights always sum to one.
    """
    from ..autodiff import _kernels as K

    eye, dirs = pixel_rays(view, height, width)
    t_enter, hit, _ = aabb_entry(eye, dirs)
    s = 2 * v
    steps = (np.arange(s) + 0.5) * (2.0 / s)
    t = np.where(hit, t_enter, 0.0)[:, None] + steps[None, :]
    pts = eye[None, None, :] + t[:, :, None] * dirs[:, None, :]
    f = pts * v + (v / 2.0 - 0.5)
    if edge_clamp:
        f = np.clip(f, 0.0, v - 1.0)
    idx, wgt = K.trilinear_ring_plan(f.reshape(-1, 3), v, dtype)
    return idx, wgt


def gather_ray_samples(grids: Tensor, views: list[Viewpoint], height: int,
                       width: int, edge_clamp: bool = False) -> Tensor:
    """(N, V, V, V) grids -> (N, H, W, S) trilinear ray samples, on the tape."""
    n, v = grids.shape[0], grids.shape[1]
    if len(views) != n:
        raise ShapeError(f"{n} grids vs {len(views)} views")
    plans = [ray_sample_plan(view, v, height, width, dtype=grids.dtype,
                             edge_clamp=edge_clamp) for view in views]
    idx = np.stack([p[0] for p in plans], axis=1)
    wgt = np.stack([p[1] for p in plans], axis=1)
    ring = ad.pad(grids, [(0, 0), (1, 1), (1, 1), (1, 1)])
    flat = ad.reshape(ring, (n, (v + 2) ** 3))
    out = ad.weighted_gather(flat, idx, wgt)
    return ad.reshape(out, (n, height, width, 2 * v))


def visual_hull_compose(samples: Tensor, tau: float) -> Tensor:
    if tau <= 0:
        raise ShapeError(f"visual hull smoothing tau must be positive, got {tau}")
    return 1.0 - ad.exp(ad.sum(samples, axis=-1) * (-tau))


def absorption_compose(samples: Tensor) -> Tensor:
    return 1.0 - ad.prod_lanes(1.0 - samples, axis=-1)


def emission_absorption_compose(absorption: Tensor, emission: Tensor, eps: float) -> Tensor:
    if eps < 0:
        raise ShapeError(f"emission-absorption eps must be >= 0, got {eps}")
    trans = ad.cumprod(1.0 - absorption, axis=-1)
    num = ad.sum(absorption * emission * trans, axis=-1)
    den = ad.sum(absorption * trans, axis=-1) + eps
    # lanes with zero optical depth have num == den == 0; pin the quotient
    # (their opacity factor is 0 anyway, matching the vanishing-density limit)
    guard = (den.numpy() == 0.0).astype(den.dtype)
    den = den + Tensor(guard, dtype=den.dtype)
    n_s = absorption.shape[-1]
    opacity = 1.0 - ad.reshape(ad.narrow(trans, trans.data.ndim - 1, n_s - 1, 1), den.shape)
    return num / den * opacity


def _as_grid_tensor(grid: VoxelGrid | Tensor) -> Tensor:
    if isinstance(grid, Tensor):
        t = grid
        if t.data.ndim == 3:
            t = ad.reshape(t, (1,) + t.shape)
        return t
    return Tensor(grid.values[None].astype(np.float64 if grid.values.dtype == np.float64
                                            else grid.values.dtype))


def visual_hull_render(grid: VoxelGrid, view: Viewpoint, height: int, width: int,
                       tau: float | None = None) -> ImageBuf:
    g = _as_grid_tensor(grid.as_continuous())
    tau = default_tau(grid.resolution) if tau is None else tau
    samples = gather_ray_samples(g, [view], height, width)
    rho = visual_hull_compose(samples, tau)
    return ImageBuf(np.clip(rho.numpy()[0], 0.0, 1.0))


def absorption_render(grid: VoxelGrid, view: Viewpoint, height: int, width: int) -> ImageBuf:
    g = _as_grid_tensor(grid.as_continuous())
    samples = gather_ray_samples(g, [view], height, width)
    rho = absorption_compose(samples)
    return ImageBuf(np.clip(rho.numpy()[0], 0.0, 1.0))


def emission_absorption_render(absorption: VoxelGrid, emission: VoxelGrid,
                               view: Viewpoint, height: int, width: int,
                               eps: float = DEFAULT_EA_EPS) -> ImageBuf:
    if absorption.resolution != emission.resolution:
        raise ShapeError("absorption and emission grids must share a resolution")
    ga = _as_grid_tensor(absorption.as_continuous())
    ge = _as_grid_tensor(emission.as_continuous())
    sa = gather_ray_samples(ga, [view], height, width)
    se = gather_ray_samples(ge, [view], height, width, edge_clamp=True)
    rho = emission_absorption_compose(sa, se, eps)
    return ImageBuf(np.clip(rho.numpy()[0], 0.0, 1.0))
