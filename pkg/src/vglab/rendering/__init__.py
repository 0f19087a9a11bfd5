"""Image formation: the off-the-shelf ray-caster and differentiable baselines."""

from .types import GridKind, ImageBuf, Viewpoint, VoxelGrid, canonical_azimuth
from .camera import AMBIENT, DIFFUSE, FOV_DEG, camera_frame, embed_rotation, pixel_rays
from .raycast import normal_map_render, raycast_batch, raycast_render
from .differentiable import (
    DEFAULT_EA_EPS,
    absorption_compose,
    absorption_render,
    default_tau,
    emission_absorption_compose,
    emission_absorption_render,
    gather_ray_samples,
    ray_sample_plan,
    visual_hull_compose,
    visual_hull_render,
)
from .embed import EmbedPlan, rotate_embed
from .io import read_png, read_vox, write_png, write_vox

__all__ = [
    "GridKind", "ImageBuf", "Viewpoint", "VoxelGrid", "canonical_azimuth",
    "AMBIENT", "DIFFUSE", "FOV_DEG", "camera_frame", "embed_rotation", "pixel_rays",
    "raycast_render", "raycast_batch", "normal_map_render",
    "visual_hull_render", "absorption_render", "emission_absorption_render",
    "visual_hull_compose", "absorption_compose", "emission_absorption_compose",
    "gather_ray_samples", "ray_sample_plan", "default_tau", "DEFAULT_EA_EPS",
    "rotate_embed", "EmbedPlan", "write_png", "read_png", "write_vox", "read_vox",
]
