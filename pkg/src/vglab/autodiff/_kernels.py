"""Raw ndarray kernels behind the differentiable primitives.

Everything here is plain numpy in channels-last layout: images are
(N, H, W, C) and volumes are (N, D, H, W, C).  Convolutions are computed
as a sum over kernel offsets of strided-view matmuls against per-offset
(Ci, Co) weight slices ("gather-GEMM"); transposed convolutions and
data gradients accumulate into strided output views instead
("scatter-GEMM"), which skips the zeros a dilation-based formulation
would multiply.  Inputs with very few channels take an explicit im2col
path where the skinny per-offset matmuls would waste BLAS.
"""

from __future__ import annotations

import itertools

import numpy as np

_IM2COL_MAX_COLS = 80  # use im2col when Ci * prod(k) is at most this


def _spatial_pad(x: np.ndarray, pad: tuple[int, ...]) -> np.ndarray:
    if all(p == 0 for p in pad):
        return x
    width = [(0, 0)] + [(p, p) for p in pad] + [(0, 0)]
    return np.pad(x, width)


def _shift_slice(x: np.ndarray, offset: tuple[int, ...], out_sp: tuple[int, ...],
                 stride: tuple[int, ...]) -> np.ndarray:
    ix = [slice(None)]
    for o, n, s in zip(offset, out_sp, stride):
        ix.append(slice(o, o + s * (n - 1) + 1, s))
    ix.append(slice(None))
    return x[tuple(ix)]


def _offsets(k: tuple[int, ...]):
    return itertools.product(*(range(kk) for kk in k))


def conv_out_shape(in_sp: tuple[int, ...], k: tuple[int, ...], stride: tuple[int, ...],
                   pad: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for n, kk, s, p in zip(in_sp, k, stride, pad):
        span = n + 2 * p - kk
        if span < 0:
            raise ValueError(
                f"conv kernel does not fit: size {n}, kernel {kk}, stride {s}, pad {p}")
        out.append(span // s + 1)
    return tuple(out)


def _im2col_matmul(xp: np.ndarray, w: np.ndarray, out_sp: tuple[int, ...],
                   stride: tuple[int, ...]) -> np.ndarray:
    k = w.shape[:xp.ndim - 2]
    n = xp.shape[0]
    ci, co = w.shape[-2], w.shape[-1]
    cols = np.empty((n,) + out_sp + k + (ci,), dtype=xp.dtype)
    for off in _offsets(k):
        cols[(slice(None),) + (slice(None),) * len(out_sp) + off] = \
            _shift_slice(xp, off, out_sp, stride)
    flat = cols.reshape(-1, int(np.prod(k)) * ci)
    wmat = w.reshape(-1, co)
    return (flat @ wmat).reshape((n,) + out_sp + (co,))


def conv_forward(x: np.ndarray, w: np.ndarray, stride: tuple[int, ...],
                 pad: tuple[int, ...]) -> np.ndarray:
    """x: (N, *sp, Ci), w: (*k, Ci, Co) -> (N, *out_sp, Co)."""
    nd = x.ndim - 2
    k = w.shape[:nd]
    out_sp = conv_out_shape(x.shape[1:-1], k, stride, pad)
    xp = _spatial_pad(x, pad)
    ci, co = w.shape[-2], w.shape[-1]
    if ci * int(np.prod(k)) <= _IM2COL_MAX_COLS:
        return _im2col_matmul(xp, w, out_sp, stride)
    out = np.zeros((x.shape[0],) + out_sp + (co,), dtype=x.dtype)
    tmp = np.empty_like(out)
    for off in _offsets(k):
        xs = _shift_slice(xp, off, out_sp, stride)
        np.matmul(xs, w[off], out=tmp)
        out += tmp
    return out


def conv_backward_weights(x: np.ndarray, g: np.ndarray, kshape: tuple[int, ...],
                          stride: tuple[int, ...], pad: tuple[int, ...]) -> np.ndarray:
    """Gradient w.r.t. w for conv_forward; g: (N, *out_sp, Co)."""
    nd = x.ndim - 2
    out_sp = g.shape[1:-1]
    xp = _spatial_pad(x, pad)
    ci, co = x.shape[-1], g.shape[-1]
    dw = np.empty(kshape[:nd] + (ci, co), dtype=x.dtype)
    gmat = np.ascontiguousarray(g).reshape(-1, co)
    for off in _offsets(kshape[:nd]):
        xs = _shift_slice(xp, off, out_sp, stride)
        dw[off] = np.ascontiguousarray(xs).reshape(-1, ci).T @ gmat
    return dw


def _scatter_gemm(src: np.ndarray, weights: dict, k: tuple[int, ...],
                  stride: tuple[int, ...], crop: tuple[int, ...],
                  out_sp: tuple[int, ...], co: int) -> np.ndarray:
    """ext[off + s*p] += src[p] @ weights[off], then crop ``crop`` per side."""
    n = src.shape[0]
    in_sp = src.shape[1:-1]
    ext_sp = tuple(s * (m - 1) + kk for m, kk, s in zip(in_sp, k, stride))
    ext = np.zeros((n,) + ext_sp + (co,), dtype=src.dtype)
    tmp = np.empty((n,) + in_sp + (co,), dtype=src.dtype)
    for off in _offsets(k):
        np.matmul(src, weights[off], out=tmp)
        view = _shift_slice(ext, off, in_sp, stride)
        view += tmp
    grow = [(0, 0)]
    index = [slice(None)]
    for want, have, c in zip(out_sp, ext_sp, crop):
        grow.append((0, max(0, want + 2 * c - have)))
        index.append(slice(c, c + want))
    grow.append((0, 0))
    index.append(slice(None))
    if any(after for _, after in grow):
        ext = np.pad(ext, grow)
    return np.ascontiguousarray(ext[tuple(index)])


def conv_backward_data(g: np.ndarray, w: np.ndarray, in_sp: tuple[int, ...],
                       stride: tuple[int, ...], pad: tuple[int, ...]) -> np.ndarray:
    """Adjoint of conv_forward w.r.t. x: scatter g back through the kernel."""
    nd = g.ndim - 2
    k = w.shape[:nd]
    weights = {off: np.ascontiguousarray(w[off].T) for off in _offsets(k)}
    return _scatter_gemm(g, weights, k, stride, pad, in_sp, w.shape[-2])


def tconv_out_shape(in_sp: tuple[int, ...], k: tuple[int, ...], stride: tuple[int, ...],
                    pad: tuple[int, ...]) -> tuple[int, ...]:
    out = tuple((n - 1) * s - 2 * p + kk for n, kk, s, p in zip(in_sp, k, stride, pad))
    if any(n <= 0 for n in out):
        raise ValueError(f"transposed conv geometry collapses: {out}")
    return out


def tconv_forward(x: np.ndarray, w: np.ndarray, stride: tuple[int, ...],
                  pad: tuple[int, ...]) -> np.ndarray:
    """Transposed convolution; x: (N, *sp, Ci), w: (*k, Ci, Co)."""
    nd = x.ndim - 2
    k = w.shape[:nd]
    if any(kk - 1 - p < 0 for kk, p in zip(k, pad)):
        raise ValueError("padding exceeds kernel-1 in transposed conv")
    out_sp = tconv_out_shape(x.shape[1:-1], k, stride, pad)
    weights = {off: w[off] for off in _offsets(k)}
    return _scatter_gemm(x, weights, k, stride, pad, out_sp, w.shape[-1])


def tconv_backward_weights(x: np.ndarray, g: np.ndarray, kshape: tuple[int, ...],
                           stride: tuple[int, ...], pad: tuple[int, ...]) -> np.ndarray:
    """dw[off] = sum_p x[p] (x) g[s*p + off - pad]."""
    nd = x.ndim - 2
    k = kshape[:nd]
    gp = _spatial_pad(g, pad)
    in_sp = x.shape[1:-1]
    ci, co = x.shape[-1], g.shape[-1]
    xmat = np.ascontiguousarray(x).reshape(-1, ci)
    dw = np.empty(k + (ci, co), dtype=x.dtype)
    for off in _offsets(k):
        gs = _shift_slice(gp, off, in_sp, stride)
        dw[off] = xmat.T @ np.ascontiguousarray(gs).reshape(-1, co)
    return dw


def tconv_backward_data(g: np.ndarray, w: np.ndarray, in_sp: tuple[int, ...],
                        stride: tuple[int, ...], pad: tuple[int, ...]) -> np.ndarray:
    """Adjoint of tconv_forward w.r.t. x: a strided conv of g with w^T."""
    nd = g.ndim - 2
    k = w.shape[:nd]
    wt = np.ascontiguousarray(np.swapaxes(w, -1, -2))
    gp = _spatial_pad(g, pad)
    ci = w.shape[-2]
    out = np.zeros((g.shape[0],) + in_sp + (ci,), dtype=g.dtype)
    tmp = np.empty_like(out)
    for off in _offsets(k):
        gs = _shift_slice(gp, off, in_sp, stride)
        np.matmul(gs, wt[off], out=tmp)
        out += tmp
    return out


def dilate(x: np.ndarray, stride: tuple[int, ...]) -> np.ndarray:
    """Insert stride-1 zeros between spatial elements."""
    if all(s == 1 for s in stride):
        return x
    sp = x.shape[1:-1]
    new_sp = tuple(s * (n - 1) + 1 for n, s in zip(sp, stride))
    out = np.zeros((x.shape[0],) + new_sp + (x.shape[-1],), dtype=x.dtype)
    ix = [slice(None)] + [slice(None, None, s) for s in stride] + [slice(None)]
    out[tuple(ix)] = x
    return out


def trilinear_ring_plan(f: np.ndarray, side: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    """Corner plan for fractional voxel coordinates against a ring-padded grid.

    ``f``: (..., 3) positions in voxel-index space of a side^3 grid.
    Returns flat indices into a zero-padded (side+2)^3 grid plus trilinear
    weights, each corner-major (8, ...).  Out-of-range corners clamp into
    the zero ring, so no masking is needed: their gathered value is 0 by
    construction.
    """
    dt = np.dtype(dtype)
    f32 = f.astype(np.float32, copy=False)
    f0 = np.floor(f32)
    frac = (f32 - f0).astype(dt, copy=False)
    raw = f0.astype(np.int32)
    # clip each corner separately so far-out corners land in the zero ring
    base = np.clip(raw, -1, side) + 1
    hi = np.clip(raw + 1, -1, side) + 1
    s2 = side + 2
    lead = f.shape[:-1]
    idx = np.empty((8,) + lead, dtype=np.int32)
    wgt = np.empty((8,) + lead, dtype=dt)
    inv = dt.type(1.0) - frac
    cx = (base[..., 0] * s2, hi[..., 0] * s2)
    cy = (base[..., 1], hi[..., 1])
    cz = (base[..., 2], hi[..., 2])
    wx = (inv[..., 0], frac[..., 0])
    wy = (inv[..., 1], frac[..., 1])
    wz = (inv[..., 2], frac[..., 2])
    corner = 0
    for dx in (0, 1):
        px = cx[dx]
        for dy in (0, 1):
            pxy = (px + cy[dy]) * s2
            wxy = wx[dx] * wy[dy]
            for dz in (0, 1):
                np.add(pxy, cz[dz], out=idx[corner])
                np.multiply(wxy, wz[dz], out=wgt[corner])
                corner += 1
    return idx, wgt


def resample_plan_batch(src_side: int, out_side: int, rots: np.ndarray, trans: np.ndarray,
                        dtype, active: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Trilinear gather plans for rigid-body resamples, one pose per item.

    Output voxel centers (pitch 1/src_side, grid centered on the origin)
    map through p_src = R @ p_out + t.  Returns ring-grid corner indices
    and weights, each corner-major (8, N, P), for a (src_side+2)^3
    zero-padded source.  ``active`` optionally restricts the planned
    output cells to the given flat indices.
    """
    rots = np.asarray(rots, dtype=np.float32)
    trans = np.asarray(trans, dtype=np.float32)
    pts = _out_centers(src_side, out_side)  # (P, 3) float32
    if active is not None:
        pts = pts[active]
    src = np.matmul(pts[None, :, :], rots.transpose(0, 2, 1)) + trans[:, None, :]
    f = src * np.float32(src_side) + np.float32(src_side / 2.0 - 0.5)
    return trilinear_ring_plan(f, src_side, dtype)


_SPHERE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def inside_sphere_mask(src_side: int, out_side: int) -> np.ndarray:
    """Flat output indices whose cells can intersect a rotated source cube."""
    key = (src_side, out_side)
    got = _SPHERE_CACHE.get(key)
    if got is None:
        pts = _out_centers(src_side, out_side)
        radius = np.sqrt(3.0) / 2.0 + np.sqrt(3.0) / src_side  # corner + support margin
        got = np.flatnonzero((pts.astype(np.float64) ** 2).sum(axis=1) <= radius ** 2)
        _SPHERE_CACHE[key] = got
    return got


_CENTER_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _out_centers(src_side: int, out_side: int) -> np.ndarray:
    key = (src_side, out_side)
    got = _CENTER_CACHE.get(key)
    if got is None:
        pitch = 1.0 / src_side
        ax = (np.arange(out_side, dtype=np.float64) + 0.5) * pitch - out_side * pitch / 2.0
        gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
        got = np.ascontiguousarray(
            np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1).astype(np.float32))
        _CENTER_CACHE[key] = got
    return got
