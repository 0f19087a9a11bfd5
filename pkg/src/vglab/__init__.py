"""vglab: learn 3D voxel generative models from unstructured 2D images.

The lab trains a voxel generator against a discriminator on images made
by a non-differentiable ray-casting renderer; gradients reach the
generator through a proxy neural renderer fitted with an L2 matching
loss plus discriminator output matching.
"""

__version__ = "0.1.0"

from . import autodiff

__all__ = ["autodiff", "__version__"]
