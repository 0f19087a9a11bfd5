"""Structured primitives: convolutions, upsampling and grid resampling.

Layout convention for all spatial ops is channels-last: images are
(N, H, W, C) and volumes are (N, D, H, W, C).  Convolution weights are
(*kernel, Cin, Cout).  Strides and paddings are explicit and must tile
the input exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import _kernels as K
from .tensor import Tensor, as_tensor, record, _wants_grad


def _norm_tuple(v, nd: int, name: str) -> tuple[int, ...]:
    if isinstance(v, int):
        return (v,) * nd
    t = tuple(int(x) for x in v)
    if len(t) != nd:
        raise ShapeError(f"{name} must have {nd} entries, got {t}")
    return t


def _conv(name: str, x: Tensor, w: Tensor, b: Tensor | None, stride, padding,
          nd: int, transposed: bool) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != nd + 2:
        raise ShapeError(f"{name}: input must be (N, {'spatial ' * nd}C)-shaped, got {x.shape}")
    if w.data.ndim != nd + 2:
        raise ShapeError(f"{name}: weight must be (*k, Cin, Cout)-shaped, got {w.shape}")
    if x.dtype != w.dtype:
        raise ShapeError(f"{name}: dtype mismatch {x.dtype} vs {w.dtype}")
    cin_axis = -2
    if x.data.shape[-1] != w.data.shape[cin_axis]:
        raise ShapeError(f"{name}: {x.shape[-1]} input channels vs weight {w.shape}")
    stride = _norm_tuple(stride, nd, "stride")
    padding = _norm_tuple(padding, nd, "padding")
    in_sp = x.data.shape[1:-1]
    kshape = w.data.shape

    if transposed:
        out_data = K.tconv_forward(x.data, w.data, stride, padding)
    else:
        out_data = K.conv_forward(x.data, w.data, stride, padding)

    # capture who needs gradients now: freezing is decided at op time
    need_x, need_w = _wants_grad(x), _wants_grad(w)

    def backward_fn(g):
        if transposed:
            gx = K.tconv_backward_data(g, w.data, in_sp, stride, padding) if need_x else None
            gw = K.tconv_backward_weights(x.data, g, kshape, stride, padding) if need_w else None
        else:
            gx = K.conv_backward_data(g, w.data, in_sp, stride, padding) if need_x else None
            gw = K.conv_backward_weights(x.data, g, kshape, stride, padding) if need_w else None
        return gx, gw

    out = record(name, out_data, (x, w), backward_fn)
    if b is not None:
        b = as_tensor(b)
        if b.data.shape != (w.data.shape[-1],):
            raise ShapeError(f"{name}: bias shape {b.shape} vs {w.shape[-1]} channels")
        out = out + b
    return out


def conv2d(x, w, b=None, stride=1, padding=0) -> Tensor:
    return _conv("conv2d", x, w, b, stride, padding, nd=2, transposed=False)


def conv3d(x, w, b=None, stride=1, padding=0) -> Tensor:
    return _conv("conv3d", x, w, b, stride, padding, nd=3, transposed=False)


def transposed_conv2d(x, w, b=None, stride=1, padding=0) -> Tensor:
    return _conv("transposed_conv2d", x, w, b, stride, padding, nd=2, transposed=True)


def transposed_conv3d(x, w, b=None, stride=1, padding=0) -> Tensor:
    return _conv("transposed_conv3d", x, w, b, stride, padding, nd=3, transposed=True)


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    """Repeat every spatial cell ``factor`` times along each spatial axis."""
    x = as_tensor(x)
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    nd = x.data.ndim - 2
    if nd < 1:
        raise ShapeError(f"nearest_upsample needs (N, *spatial, C), got {x.shape}")
    out_data = x.data
    for ax in range(1, 1 + nd):
        out_data = np.repeat(out_data, factor, axis=ax)

    def backward_fn(g):
        n, c = x.data.shape[0], x.data.shape[-1]
        sp = x.data.shape[1:-1]
        shaped = [n]
        for s in sp:
            shaped.extend([s, factor])
        shaped.append(c)
        gsum = g.reshape(shaped)
        for ax in range(1 + 2 * nd - 1, 0, -2):
            gsum = gsum.sum(axis=ax)
        return (np.ascontiguousarray(gsum),)

    return record("nearest_upsample", out_data, (x,), backward_fn)


def weighted_gather(x: Tensor, idx: np.ndarray, wgt: np.ndarray) -> Tensor:
    """Batched sparse gather: out[n, p] = sum_k x[n, idx[k, n, p]] * wgt[k, n, p].

    ``idx``/``wgt`` are fixed corner-major sampling plans (not
    differentiable); the gradient scatters back onto x.  x is (N, M)
    flat per-sample storage.
    """
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"weighted_gather expects (N, M) input, got {x.shape}")
    n, m = x.data.shape
    if idx.shape != wgt.shape or idx.ndim != 3 or idx.shape[1] != n:
        raise ShapeError(f"bad plan shapes idx {idx.shape} wgt {wgt.shape} for x {x.shape}")
    wgt = wgt.astype(x.dtype, copy=False)
    offs = (np.arange(n, dtype=idx.dtype) * m)[None, :, None]
    gidx = idx + offs
    vals = np.take(x.data.reshape(-1), gidx)
    out_data = np.einsum("knp,knp->np", vals, wgt)

    def backward_fn(g):
        acc = np.zeros(n * m, dtype=x.dtype)
        np.add.at(acc, gidx.ravel(), (g[None, :, :] * wgt).ravel())
        return (acc.reshape(n, m),)

    return record("weighted_gather", out_data, (x,), backward_fn)


def fixed_scatter(x: Tensor, positions: np.ndarray, out_size: int) -> Tensor:
    """Place per-sample columns at fixed slots: out[n, positions[j]] = x[n, j].

    Slots not listed stay zero; positions must be unique.  The gradient
    is the corresponding gather.
    """
    x = as_tensor(x)
    if x.data.ndim != 2 or positions.ndim != 1 or positions.shape[0] != x.data.shape[1]:
        raise ShapeError(f"fixed_scatter mismatch: x {x.shape} vs positions {positions.shape}")
    n = x.data.shape[0]
    out_data = np.zeros((n, out_size), dtype=x.dtype)
    out_data[:, positions] = x.data

    def backward_fn(g):
        return (np.ascontiguousarray(g[:, positions]),)

    return record("fixed_scatter", out_data, (x,), backward_fn)


def grid_resample_trilinear(x: Tensor, rot: np.ndarray, out_side: int,
                            trans=(0.0, 0.0, 0.0)) -> Tensor:
    """Rigid-body resample of cubic grids, zero outside the source.

    x is (N, V, V, V); ``rot`` is one 3x3 matrix or a stack of N of them.
    Output voxel centers (same pitch as the source, grid centered on the
    origin) map through p_src = rot @ p_out + trans and sample the source
    trilinearly.  Only x carries gradient; the pose is a fixed plan.

    For pure rotations the output cells beyond the source's bounding
    sphere are skipped outright: rotations preserve radius, so those
    cells are identically zero for every pose.
    """
    x = as_tensor(x)
    if x.data.ndim != 4 or len({x.data.shape[1], x.data.shape[2], x.data.shape[3]}) != 1:
        raise ShapeError(f"grid_resample_trilinear expects (N, V, V, V), got {x.shape}")
    n, v = x.data.shape[0], x.data.shape[1]
    rot = np.asarray(rot, dtype=np.float64)
    trans = np.asarray(trans, dtype=np.float64)
    if rot.ndim == 2:
        rot = np.broadcast_to(rot, (n, 3, 3))
    if trans.ndim == 1:
        trans = np.broadcast_to(trans, (n, 3))
    from .tensor import pad as zero_pad

    ring = zero_pad(x, [(0, 0), (1, 1), (1, 1), (1, 1)])
    flat = ring.reshape((n, (v + 2) ** 3))
    if np.all(trans == 0.0):
        active = K.inside_sphere_mask(v, out_side)
        idx, wgt = K.resample_plan_batch(v, out_side, rot, trans, x.dtype, active=active)
        got = weighted_gather(flat, idx, wgt)
        out = fixed_scatter(got, active, out_side ** 3)
    else:
        idx, wgt = K.resample_plan_batch(v, out_side, rot, trans, x.dtype)
        out = weighted_gather(flat, idx, wgt)
    return out.reshape((n, out_side, out_side, out_side))
