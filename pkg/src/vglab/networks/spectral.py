"""Spectral normalization by power iteration."""

from __future__ import annotations

import warnings

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

_TINY = 1e-12


def spectral_normalize(w_mat: np.ndarray, u: np.ndarray,
                       n_iter: int = 1) -> tuple[np.ndarray, np.ndarray, float]:
    """One (or more) power-iteration steps on a matricized weight.

    Returns (w / sigma_hat, updated u, sigma_hat) with sigma_hat = u^T W v.
    A zero matrix cannot be normalized; it is returned unchanged with a
    warning, matching the convention that sigma of 0 is left alone.
    """
    u = u.copy()
    v = None
    for _ in range(n_iter):
        v = w_mat.T @ u
        nv = np.linalg.norm(v)
        if nv < _TINY:
            warnings.warn("spectral norm skipped: weight matrix is numerically zero")
            return w_mat, u, 0.0
        v = v / nv
        u = w_mat @ v
        nu = np.linalg.norm(u)
        if nu < _TINY:
            warnings.warn("spectral norm skipped: weight matrix is numerically zero")
            return w_mat, u, 0.0
        u = u / nu
    sigma = float(u @ w_mat @ v)
    return w_mat / sigma, u, sigma


def estimate_sigma(w_mat: np.ndarray, u: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Single power-iteration estimate of the top singular value (no normalize)."""
    v = w_mat.T @ u
    nv = np.linalg.norm(v)
    if nv < _TINY:
        return 0.0, u, np.zeros(w_mat.shape[1], dtype=w_mat.dtype)
    v = v / nv
    u_new = w_mat @ v
    nu = np.linalg.norm(u_new)
    if nu < _TINY:
        return 0.0, u, v
    u_new = u_new / nu
    return float(u_new @ w_mat @ v), u_new, v


class SpectralWeight:
    """Tape-aware wrapper: divides a weight by its estimated spectral norm.

    The power-iteration vectors are held as constants (one iteration per
    forward, persistent u), while sigma_hat = sum(w * u v^T) stays on the
    tape so gradients see the normalization, as in standard SN-GAN.
    """

    def __init__(self, module, rng: np.random.Generator, name: str, w: Tensor):
        self.w = w
        self.name = name
        out_dim = w.data.shape[-1]
        u = rng.standard_normal(out_dim).astype(w.dtype)
        u /= np.linalg.norm(u)
        module._buffers[f"sn_u.{name}"] = u
        self._buffers = module._buffers
        self._key = f"sn_u.{name}"

    def normalized(self, update: bool = True) -> Tensor:
        w = self.w
        mat = w.data.reshape(-1, w.data.shape[-1]).T  # (out, rest)
        u = self._buffers[self._key]
        sigma, u_new, v = estimate_sigma(mat, u)
        if sigma <= 0.0:
            warnings.warn(f"spectral norm skipped for '{self.name}': zero weight")
            return w
        if update:
            self._buffers[self._key] = u_new.astype(u.dtype)
        outer = np.outer(u_new, v)  # (out, rest)
        coeff = Tensor(outer.T.reshape(w.data.shape), dtype=w.dtype)
        sigma_t = ad.sum(w * coeff)
        return w / ad.reshape(sigma_t, (1,) * w.data.ndim)
