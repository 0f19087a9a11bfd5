"""Finite-difference oracle for every differentiable primitive and composite.

Central differences with step h approximate d f / d x_i to O(h^2); the
check is run at float64 where a 1e-5 step leaves ~1e-10 headroom against
the 1e-4 acceptance tolerance.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, dtype_scope, no_grad


def finite_difference_grad(fn: Callable[[], Tensor], x: Tensor, step: float = 1e-5) -> np.ndarray:
    """Numeric gradient of the scalar fn() w.r.t. x, perturbing x.data in place."""
    g = np.zeros_like(x.data, dtype=np.float64)
    flat = x.data.reshape(-1)
    gflat = g.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn().item()
            flat[i] = orig - step
            lo = fn().item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
    return g


def check_gradients(fn: Callable[[], Tensor], wrt: Sequence[Tensor],
                    step: float = 1e-5, tol: float = 1e-4) -> float:
    """Compare reverse-mode and finite-difference gradients of scalar fn().

    Returns the worst relative error max|ad - fd| / max(1, max|fd|) over
    all checked tensors and raises AssertionError when it exceeds tol.
    """
    with dtype_scope(np.float64):
        for t in wrt:
            t.zero_grad()
        loss = fn()
        backward(loss)
        worst = 0.0
        for t in wrt:
            ad = t.grad.copy()
            fd = finite_difference_grad(fn, t, step=step)
            scale = max(1.0, float(np.max(np.abs(fd))) if fd.size else 0.0)
            err = float(np.max(np.abs(ad - fd))) / scale if fd.size else 0.0
            worst = max(worst, err)
        if worst > tol:
            raise AssertionError(f"gradcheck failed: relative error {worst:.3e} > {tol:.1e}")
        return worst
