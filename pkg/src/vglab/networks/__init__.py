"""The three learned networks and spectral normalization."""

from .layers import Module, ResBlock, gaussian_init, lrelu
from .spectral import SpectralWeight, estimate_sigma, spectral_normalize
from .generator import GeneratorNet
from .discriminator import DiscriminatorNet
from .renderer import ProxyRendererNet, neural_render

__all__ = [
    "Module", "ResBlock", "gaussian_init", "lrelu",
    "SpectralWeight", "estimate_sigma", "spectral_normalize",
    "GeneratorNet", "DiscriminatorNet", "ProxyRendererNet", "neural_render",
]
