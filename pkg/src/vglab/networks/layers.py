"""Parameter plumbing and building blocks shared by the three networks."""

from __future__ import annotations

import contextlib

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeError

INIT_STD = 0.02  # gaussian init, DCGAN convention
LEAK = 0.2


class Module:
    """Named parameter container with freeze/thaw and flat state arrays."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}

    def _add_param(self, name: str, array: np.ndarray) -> Tensor:
        t = Tensor(array, requires_grad=True, dtype=array.dtype)
        self._params[name] = t
        return t

    def parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def n_parameters(self) -> int:
        return int(np.sum([p.size for p in self._params.values()]))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def set_requires_grad(self, flag: bool) -> None:
        for p in self._params.values():
            p.requires_grad = flag
            if flag and p.grad is None:
                p.grad = np.zeros_like(p.data)

    @contextlib.contextmanager
    def frozen(self):
        """Gradients still flow through the network but never land on it."""
        self.set_requires_grad(False)
        try:
            yield
        finally:
            self.set_requires_grad(True)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {name: p.data for name, p in self._params.items()}
        out.update({f"buf.{k}": v for k, v in self._buffers.items()})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            src = arrays[name]
            p.data = src.astype(p.dtype).reshape(p.data.shape)
            p.grad = np.zeros_like(p.data) if p.requires_grad else None
        for k in self._buffers:
            self._buffers[k] = arrays[f"buf.{k}"].astype(self._buffers[k].dtype).reshape(
                self._buffers[k].shape)

    def params_snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}


def gaussian_init(rng: np.random.Generator, shape, std: float = INIT_STD,
                  dtype=np.float32) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(dtype)


def lrelu(x: Tensor) -> Tensor:
    return ad.leaky_relu(x, alpha=LEAK)


class ConvSpec:
    """One conv layer's weights plus geometry, owned by a Module."""

    def __init__(self, module: Module, rng: np.random.Generator, name: str,
                 kernel: tuple[int, ...], cin: int, cout: int,
                 stride: int = 1, padding: int = 0, transposed: bool = False,
                 dtype=np.float32):
        self.w = module._add_param(f"{name}.w", gaussian_init(rng, kernel + (cin, cout), dtype=dtype))
        self.b = module._add_param(f"{name}.b", np.zeros(cout, dtype=dtype))
        self.stride = stride
        self.padding = padding
        self.nd = len(kernel)
        self.transposed = transposed

    def __call__(self, x: Tensor) -> Tensor:
        if self.nd == 2:
            op = ad.transposed_conv2d if self.transposed else ad.conv2d
        elif self.nd == 3:
            op = ad.transposed_conv3d if self.transposed else ad.conv3d
        else:
            raise ShapeError(f"unsupported conv rank {self.nd}")
        return op(x, self.w, self.b, stride=self.stride, padding=self.padding)


class ResBlock:
    """Two same-width convs with an additive skip; 3^d kernels, no normalization."""

    def __init__(self, module: Module, rng: np.random.Generator, name: str,
                 channels: int, nd: int, dtype=np.float32):
        k = (3,) * nd
        self.c1 = ConvSpec(module, rng, f"{name}.c1", k, channels, channels, padding=1, dtype=dtype)
        self.c2 = ConvSpec(module, rng, f"{name}.c2", k, channels, channels, padding=1, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.c2(lrelu(self.c1(x)))
        return lrelu(x + h)
