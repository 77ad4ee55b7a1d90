"""Neural-net primitives: convolutions, activations, softmax, linear maps.

Convolution is cross-correlation (no kernel flip), NCHW layout. Forward
passes lower onto im2col + BLAS matmul; transposed convolution is the exact
adjoint of the matching convolution's linear map, realized with the same
column machinery so the inner-product identity holds to rounding error.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor


# -- raw conv machinery (shared by conv2d / conv_transpose2d) -----------------

def _im2col(x, kh, kw, stride, padding):
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (x.shape[2] - kh) // stride + 1
    ow = (x.shape[3] - kw) // stride + 1
    v = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(v.transpose(0, 1, 4, 5, 2, 3)).reshape(n, c * kh * kw, oh * ow)
    return cols, oh, ow


def _col2im(dcols6, xshape, stride, padding):
    """Scatter column gradients back to input positions (adjoint of im2col)."""
    n, c, h, w = xshape
    kh, kw, oh, ow = dcols6.shape[2], dcols6.shape[3], dcols6.shape[4], dcols6.shape[5]
    gx = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=dcols6.dtype)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += dcols6[:, :, i, j]
    if padding:
        gx = gx[:, :, padding:padding + h, padding:padding + w]
    return gx


def _conv_fwd(x, w, stride, padding):
    n = x.shape[0]
    cout, cin, kh, kw = w.shape
    cols, oh, ow = _im2col(x, kh, kw, stride, padding)
    out = np.matmul(w.reshape(cout, -1), cols).reshape(n, cout, oh, ow)
    return out, cols


def _conv_dx(gy, w, xshape, stride, padding):
    n, cout, oh, ow = gy.shape
    cin, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    dcols = np.matmul(w.reshape(cout, -1).T, gy.reshape(n, cout, oh * ow))
    return _col2im(dcols.reshape(n, cin, kh, kw, oh, ow), xshape, stride, padding)


def _conv_dw(cols, gy, wshape):
    n, cout, oh, ow = gy.shape
    g2 = gy.reshape(n, cout, oh * ow)
    return np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(wshape)


# -- public ops ----------------------------------------------------------------

def conv2d(x, weight, bias, stride=1, padding=0):
    """2-D cross-correlation.

    x: [N,Cin,H,W], weight: [Cout,Cin,kh,kw], bias: [Cout]. Output spatial
    dims follow floor((H+2p-kh)/s)+1 and must be >= 1. Differentiable w.r.t.
    all three tensor arguments.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv2d expects NCHW input and [Cout,Cin,kh,kw] weight")
    n, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv2d: input has {cin} channels, weight expects {cin_w}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride must be positive and padding non-negative")
    if (h + 2 * padding - kh) // stride + 1 < 1 or (w + 2 * padding - kw) // stride + 1 < 1:
        raise ValueError("conv2d: output would be empty for this input/kernel/stride")

    out, cols = _conv_fwd(x.data, weight.data, stride, padding)
    out += bias.data[:, None, None]
    need_x, need_w, need_b = x.requires_grad, weight.requires_grad, bias.requires_grad
    xshape, wshape = x.shape, weight.shape

    def vjp(g):
        gx = _conv_dx(g, weight.data, xshape, stride, padding) if need_x else None
        gw = _conv_dw(cols, g, wshape) if need_w else None
        gb = g.sum(axis=(0, 2, 3)) if need_b else None
        return gx, gw, gb

    return Tensor._make(out, (x, weight, bias), vjp, "conv2d")


def conv_transpose2d(x, weight, bias, stride=1, padding=0):
    """Transposed 2-D convolution: the exact adjoint of conv2d's linear map.

    x: [N,Cin,H,W], weight: [Cin,Cout,kh,kw] (first axis matches the input,
    as in the adjoint pairing with conv2d), bias: [Cout]. Output spatial dims
    are (H-1)*s - 2p + kh.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv_transpose2d expects NCHW input and [Cin,Cout,kh,kw] weight")
    n, cin, h, w = x.shape
    cin_w, cout, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv_transpose2d: input has {cin} channels, weight expects {cin_w}")
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (w - 1) * stride - 2 * padding + kw
    if oh < 1 or ow < 1:
        raise ValueError("conv_transpose2d: output would be empty")

    # weight doubles as the conv kernel [Cout_c=Cin, Cin_c=Cout, kh, kw] of
    # the map being transposed
    out = _conv_dx(x.data, weight.data, (n, cout, oh, ow), stride, padding)
    out += bias.data[:, None, None]
    need_x, need_w, need_b = x.requires_grad, weight.requires_grad, bias.requires_grad
    wshape = weight.shape

    def vjp(g):
        gx = gw = gb = None
        if need_x:
            gx = _conv_fwd(g, weight.data, stride, padding)[0]
        if need_w:
            cols_g, _, _ = _im2col(g, kh, kw, stride, padding)
            gw = _conv_dw(cols_g, x.data, wshape)
        if need_b:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    return Tensor._make(out, (x, weight, bias), vjp, "conv_transpose2d")


def leaky_relu(x, slope=0.1):
    """x if x >= 0 else slope*x; the subgradient at 0 takes the unit branch."""
    if not 0.0 < slope < 1.0:
        raise ValueError("leaky_relu slope must lie in (0, 1)")
    pos = x.data >= 0
    out = np.where(pos, x.data, slope * x.data)

    def vjp(g):
        return (np.where(pos, g, slope * g),)

    return Tensor._make(out, (x,), vjp, "leaky_relu")


def softmax(x, axes):
    """Softmax jointly over a group of axes, stabilized by max subtraction.

    Outputs are non-negative and sum to 1 over the axis group for every
    remaining index.
    """
    axes = tuple(axes) if isinstance(axes, (tuple, list)) else (axes,)
    shifted = x.data - x.data.max(axis=axes, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axes, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axes, keepdims=True)),)

    return Tensor._make(y, (x,), vjp, "softmax")


def linear(x, weight, bias):
    """Per-row affine map: [Q,Cin] @ [Cout,Cin]^T + [Cout]."""
    out = x.data @ weight.data.T + bias.data
    need_x, need_w, need_b = x.requires_grad, weight.requires_grad, bias.requires_grad

    def vjp(g):
        gx = g @ weight.data if need_x else None
        gw = g.T @ x.data if need_w else None
        gb = g.sum(axis=0) if need_b else None
        return gx, gw, gb

    return Tensor._make(out, (x, weight, bias), vjp, "linear")


# -- parameter initialization ---------------------------------------------------

def kaiming_uniform(rng, shape, fan_in, slope=0.1, dtype=np.float32):
    """Uniform fan-in scaled init with leaky-relu gain."""
    gain = math.sqrt(2.0 / (1.0 + slope * slope))
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
