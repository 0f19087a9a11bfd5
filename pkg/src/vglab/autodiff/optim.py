"""Adam with bias correction, operating in place on parameter tensors."""

from __future__ import annotations

import numpy as np

from ..errors import VglabError
from .tensor import Tensor


class Adam:
    """Standard Adam over an ordered set of named parameters.

    Moments live alongside the parameters with the same dtype; state is
    exposed for checkpointing so a resumed run replays bit-identically.
    """

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise VglabError(f"learning rate must be positive, got {lr}")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        dt = next(iter(self.params.values())).dtype if self.params else np.float32
        b1, b2 = dt.type(self.beta1), dt.type(self.beta2)
        c1 = dt.type(1.0 - self.beta1 ** self.t)
        c2 = dt.type(1.0 - self.beta2 ** self.t)
        lr, eps = dt.type(self.lr), dt.type(self.eps)
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (dt.type(1) - b1) * g
            v *= b2
            v += (dt.type(1) - b2) * (g * g)
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"m.{name}"] = self.m[name]
            out[f"v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        for name in self.params:
            self.m[name] = arrays[f"m.{name}"].astype(self.m[name].dtype).reshape(self.m[name].shape)
            self.v[name] = arrays[f"v.{name}"].astype(self.v[name].dtype).reshape(self.v[name].shape)
        self.t = int(t)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: "Adam") -> None:
    """One functional-style update: deposit grads then advance the optimizer."""
    for name, g in grads.items():
        p = params[name]
        if p.grad is None:
            raise VglabError(f"parameter '{name}' does not require grad")
        p.grad[...] = g
    state.step()
