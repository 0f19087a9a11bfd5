"""Dense tensors with reverse-mode automatic differentiation.

A module-level tape records every primitive applied to tensors that
require (or carry) gradients.  ``backward`` replays the tape once in
reverse, deposits gradients on requiring leaves and clears the tape;
calling it again without rebuilding the graph is an error.

Precision is a property of the tensors themselves: tests run the tape
at float64 for tight finite-difference checks, training runs at
float32.  Mixing dtypes inside one graph is rejected rather than
silently promoted.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import NonFiniteError, ShapeError, TapeError

_state = threading.local()


def _tls():
    if not hasattr(_state, "tape"):
        _state.tape = Tape()
        _state.recording = True
        _state.default_dtype = np.float32
    return _state


def set_default_dtype(dtype) -> None:
    _tls().default_dtype = np.dtype(dtype)


def default_dtype() -> np.dtype:
    return np.dtype(_tls().default_dtype)


@contextlib.contextmanager
def dtype_scope(dtype):
    st = _tls()
    old = st.default_dtype
    st.default_dtype = np.dtype(dtype)
    try:
        yield
    finally:
        st.default_dtype = old


@contextlib.contextmanager
def no_grad():
    st = _tls()
    old = st.recording
    st.recording = False
    try:
        yield
    finally:
        st.recording = old


class Node:
    __slots__ = ("parents", "out", "backward_fn", "name", "wants")

    def __init__(self, parents: tuple["Tensor", ...], out: "Tensor",
                 backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]], name: str,
                 wants: tuple[bool, ...]):
        self.parents = parents
        self.out = out
        self.backward_fn = backward_fn
        self.name = name
        self.wants = wants


class Tape:
    """Ordered record of primitive applications; creation order is topological."""

    def __init__(self):
        self.nodes: list[Node] = []

    def clear(self) -> None:
        for node in self.nodes:
            node.out._node = None
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Tape:
    return _tls().tape


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        dt = np.dtype(dtype) if dtype is not None else default_dtype()
        arr = np.asarray(data, dtype=dt)
        _check_finite(arr, "tensor")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self._node: Node | None = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.dtype)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or not isinstance(shape[0], (tuple, list)) else shape[0])

    def backward(self) -> None:
        backward(self)


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by '{name}'")


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def _wants_grad(t: Tensor) -> bool:
    return t.requires_grad or t._node is not None


def record(name: str, out_data: np.ndarray, parents: tuple[Tensor, ...],
           backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]) -> Tensor:
    """Create the output tensor of a primitive, taping it when needed."""
    _check_finite(out_data, name)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = False
    out.grad = None
    out._node = None
    st = _tls()
    if st.recording:
        wants = tuple(_wants_grad(p) for p in parents)
        if any(wants):
            node = Node(parents, out, backward_fn, name, wants)
            out._node = node
            st.tape.nodes.append(node)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every requiring leaf, then clear the tape."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = _tls().tape
    if loss._node is None:
        raise TapeError("loss is not on the active tape (empty tape or already consumed)")

    needed: set[int] = set()
    stack = [loss._node]
    while stack:
        node = stack.pop()
        if id(node) in needed:
            continue
        needed.add(id(node))
        for p in node.parents:
            if p._node is not None and id(p._node) not in needed:
                stack.append(p._node)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        if id(node) not in needed:
            continue
        gout = grads.pop(id(node.out), None)
        if gout is None:
            continue
        pgrads = node.backward_fn(gout)
        for parent, g, wanted in zip(node.parents, pgrads, node.wants):
            if g is None or not wanted:
                continue
            if g.shape != parent.data.shape:
                raise ShapeError(
                    f"backward of '{node.name}' produced grad {g.shape} for parent {parent.data.shape}")
            if parent.requires_grad and parent.grad is not None:
                parent.grad += g
            if parent._node is not None:
                acc = grads.get(id(parent))
                if acc is None:
                    grads[id(parent)] = g.copy() if parent.requires_grad else g
                else:
                    acc += g
    tape.clear()


# ---------------------------------------------------------------------
# elementwise primitives
# ---------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _binary(name: str, a, b, fwd, bwd_a, bwd_b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    if a.dtype != b.dtype:
        raise ShapeError(f"{name}: mixed dtypes {a.dtype} vs {b.dtype}")
    with np.errstate(all="ignore"):  # non-finite results raise in record()
        out_data = fwd(a.data, b.data)
    need_a, need_b = _wants_grad(a), _wants_grad(b)

    def backward_fn(g):
        ga = _unbroadcast(bwd_a(g, a.data, b.data), a.data.shape) if need_a else None
        gb = _unbroadcast(bwd_b(g, a.data, b.data), b.data.shape) if need_b else None
        return ga, gb

    return record(name, out_data, (a, b), backward_fn)


def add(a, b) -> Tensor:
    return _binary("add", a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary("mul", a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary("div", a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return record("neg", -a.data, (a,), lambda g: (-g,))


def _unary(name: str, a: Tensor, fwd, bwd) -> Tensor:
    a = as_tensor(a)
    with np.errstate(all="ignore"):  # non-finite results raise in record()
        out_data = fwd(a.data)

    def backward_fn(g):
        return (bwd(g, a.data, out_data),)

    return record(name, out_data, (a,), backward_fn)


def relu(a: Tensor) -> Tensor:
    return _unary("relu", a, lambda x: np.maximum(x, 0),
                  lambda g, x, y: g * (x > 0))


def leaky_relu(a: Tensor, alpha: float = 0.2) -> Tensor:
    return _unary("leaky_relu", a,
                  lambda x: np.where(x > 0, x, x * x.dtype.type(alpha)),
                  lambda g, x, y: g * np.where(x > 0, x.dtype.type(1), x.dtype.type(alpha)))


def sigmoid(a: Tensor) -> Tensor:
    def fwd(x):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    return _unary("sigmoid", a, fwd, lambda g, x, y: g * y * (1.0 - y))


def tanh(a: Tensor) -> Tensor:
    return _unary("tanh", a, np.tanh, lambda g, x, y: g * (1.0 - y * y))


def exp(a: Tensor) -> Tensor:
    return _unary("exp", a, np.exp, lambda g, x, y: g * y)


def log(a: Tensor) -> Tensor:
    return _unary("log", a, np.log, lambda g, x, y: g / x)


def square(a: Tensor) -> Tensor:
    return _unary("square", a, np.square, lambda g, x, y: g * 2.0 * x)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    if lo > hi:
        raise ShapeError(f"clamp bounds inverted: {lo} > {hi}")
    return _unary("clamp", a, lambda x: np.clip(x, lo, hi),
                  lambda g, x, y: g * ((x >= lo) & (x <= hi)))


# ---------------------------------------------------------------------
# reductions and shape primitives
# ---------------------------------------------------------------------

def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)
        g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)

    return record("sum", np.asarray(out_data), (a,), backward_fn)


def mean(a: Tensor, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])
    out_data = a.data.mean(axis=axis)

    def backward_fn(g):
        scale = a.dtype.type(1.0 / count)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g * scale, a.data.shape).astype(a.dtype, copy=True),)

    return record("mean", np.asarray(out_data), (a,), backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)
    in_shape = a.data.shape
    return record("reshape", out_data, (a,), lambda g: (g.reshape(in_shape),))


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if len({t.dtype for t in ts}) != 1:
        raise ShapeError("concat: mixed dtypes")
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return record("concat", out_data, tuple(ts), backward_fn)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    a = as_tensor(a)
    ix = [slice(None)] * a.data.ndim
    ix[axis] = slice(start, start + length)
    out_data = np.ascontiguousarray(a.data[tuple(ix)])

    def backward_fn(g):
        full = np.zeros_like(a.data)
        full[tuple(ix)] = g
        return (full,)

    return record("narrow", out_data, (a,), backward_fn)


def pad(a: Tensor, pad_width) -> Tensor:
    """Zero padding; pad_width follows np.pad's per-axis (before, after) form."""
    a = as_tensor(a)
    pw = [tuple(p) for p in pad_width]
    out_data = np.pad(a.data, pw)
    ix = tuple(slice(b, b + n) for (b, _), n in zip(pw, a.data.shape))
    return record("pad", out_data, (a,), lambda g: (np.ascontiguousarray(g[ix]),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data
    need_a, need_b = _wants_grad(a), _wants_grad(b)

    def backward_fn(g):
        ga = g @ b.data.T if need_a else None
        gb = a.data.T @ g if need_b else None
        return ga, gb

    return record("matmul", out_data, (a, b), backward_fn)


def cumprod(a: Tensor, axis: int) -> Tensor:
    """Inclusive running product along ``axis``.

    The backward pass materializes a (n, n) coupling per lane, which is
    fine for the short per-ray sample chains it exists for.
    """
    a = as_tensor(a)
    out_data = np.cumprod(a.data, axis=axis)

    def backward_fn(g):
        x = np.moveaxis(a.data, axis, -1)
        gm = np.moveaxis(g, axis, -1)
        n = x.shape[-1]
        lanes = x.reshape(-1, n)
        glanes = gm.reshape(-1, n)
        # jac[i, j] = d out_i / d x_j = prod_{k<=i, k!=j} x_k  for j <= i
        eye = np.eye(n, dtype=x.dtype)
        tiled = np.where(eye[None, :, :] == 1, x.dtype.type(1), lanes[:, None, :])
        running = np.cumprod(tiled, axis=2)
        jac = np.transpose(running, (0, 2, 1)) * (np.tri(n, dtype=x.dtype)[None, :, :])
        gx = np.einsum("li,lij->lj", glanes, jac)
        return (np.moveaxis(gx.reshape(x.shape), -1, axis),)

    return record("cumprod", out_data, (a,), backward_fn)


def prod_lanes(a: Tensor, axis: int) -> Tensor:
    """Full product along ``axis`` with a zero-safe backward."""
    a = as_tensor(a)
    out_data = a.data.prod(axis=axis)

    def backward_fn(g):
        x = np.moveaxis(a.data, axis, -1)
        n = x.shape[-1]
        ones = np.ones_like(x[..., :1])
        left = np.concatenate([ones, np.cumprod(x[..., :-1], axis=-1)], axis=-1)
        right = np.concatenate(
            [np.cumprod(x[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1)
        gx = np.expand_dims(g, axis) * np.moveaxis(left * right, -1, axis)
        return (np.ascontiguousarray(gx),)

    return record("prod", np.asarray(out_data), (a,), backward_fn)
