"""Image discriminator: stride-2 conv stack, spectrally normalized throughout."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeError
from .layers import Module, gaussian_init, lrelu
from .spectral import SpectralWeight


class DiscriminatorNet(Module):
    """Four stride-2 convs then a linear head; sigmoid output in (0, 1).

    Every conv/linear weight is divided by a one-step power-iteration
    estimate of its spectral norm on each forward pass (persistent u).
    Inputs in [0, 1] are shifted to [-1, 1] before the first conv.
    """

    def __init__(self, image_size: int = 32, widths: tuple[int, ...] = (8, 16, 32, 64),
                 seed: int = 0, dtype=np.float32):
        super().__init__()
        if len(widths) != 4:
            raise ShapeError(f"discriminator takes 4 stage widths, got {widths}")
        if image_size % 16 != 0:
            raise ShapeError(f"image size must be divisible by 16, got {image_size}")
        self.image_size = image_size
        self.widths = tuple(widths)
        rng = np.random.default_rng(seed)
        chans = (1,) + self.widths
        self._convs = []
        for i in range(4):
            w = self._add_param(f"c{i}.w", gaussian_init(rng, (4, 4, chans[i], chans[i + 1]), dtype=dtype))
            b = self._add_param(f"c{i}.b", np.zeros(chans[i + 1], dtype=dtype))
            self._convs.append((SpectralWeight(self, rng, f"c{i}.w", w), b))
        side = image_size // 16
        feat = side * side * widths[-1]
        w = self._add_param("fc.w", gaussian_init(rng, (feat, 1), dtype=dtype))
        self._fc_b = self._add_param("fc.b", np.zeros(1, dtype=dtype))
        self._fc_sn = SpectralWeight(self, rng, "fc.w", w)
        self._feat = feat

    def forward(self, images: Tensor, update_sn: bool = True) -> Tensor:
        """(N, H, W) or (N, H, W, 1) images in [0, 1] -> (N,) scores in (0, 1)."""
        x = images
        if x.data.ndim == 3:
            x = ad.reshape(x, x.shape + (1,))
        if x.data.ndim != 4 or x.shape[1] != self.image_size or x.shape[2] != self.image_size:
            raise ShapeError(f"expected (N, {self.image_size}, {self.image_size}[, 1]) images, got {images.shape}")
        n = x.shape[0]
        h = x * 2.0 - 1.0
        for sn, b in self._convs:
            wn = sn.normalized(update=update_sn)
            h = lrelu(ad.conv2d(h, wn, b, stride=2, padding=1))
        h = ad.reshape(h, (n, self._feat))
        logits = h @ self._fc_sn.normalized(update=update_sn) + self._fc_b
        return ad.reshape(ad.sigmoid(logits), (n,))

    __call__ = forward

    def effective_spectral_norms(self) -> dict[str, float]:
        """Exact top singular value of each weight as the next forward sees it."""
        from .spectral import estimate_sigma

        out = {}
        for sn in [c[0] for c in self._convs] + [self._fc_sn]:
            mat = sn.w.data.reshape(-1, sn.w.data.shape[-1]).T
            sigma, _, _ = estimate_sigma(mat, self._buffers[sn._key])
            eff = mat / sigma if sigma > 0 else mat
            out[sn.name] = float(np.linalg.svd(eff, compute_uv=False)[0])
        return out
