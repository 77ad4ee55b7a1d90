"""Shared test utilities: independent brute-force oracles and model helpers."""

import math

import numpy as np

from vdeblur.tensor import Tensor


def conv2d_oracle(x, w, b, stride, padding):
    """Direct-summation cross-correlation, all loops explicit."""
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wid + 2 * padding - kw) // stride + 1
    xp = np.zeros((n, cin, h + 2 * padding, wid + 2 * padding), dtype=x.dtype)
    xp[:, :, padding:padding + h, padding:padding + wid] = x
    out = np.zeros((n, cout, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for co in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += x.dtype.type(
                                    w[co, ci, ky, kx] * xp[ni, ci, oy * stride + ky, ox * stride + kx])
                    out[ni, co, oy, ox] = acc + b[co]
    return out


def bilinear_oracle(feature, x, y):
    """Scalar bilinear lookup with border clamping, per channel."""
    c, h, w = feature.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0 = min(int(math.floor(x)), w - 1)
    y0 = min(int(math.floor(y)), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return ((1 - fy) * ((1 - fx) * feature[:, y0, x0] + fx * feature[:, y0, x1])
            + fy * ((1 - fx) * feature[:, y1, x0] + fx * feature[:, y1, x1]))


def deform_attention_oracle(values, positions, weights, heads):
    """Five-nested-loop reference for the attention core: for every query,
    head, frame and sampling point, bilinearly sample the head's value
    channels and accumulate with the attention weight."""
    t_n, c, h, w = values.shape
    q_n, m_n, _, k_n = weights.shape
    cm = c // heads
    out = np.zeros((q_n, c), dtype=np.float64)
    for qi in range(q_n):
        for mi in range(m_n):
            head_slice = values[:, mi * cm:(mi + 1) * cm]
            for ti in range(t_n):
                for ki in range(k_n):
                    x, y = positions[qi, mi, ti, ki]
                    val = bilinear_oracle(head_slice[ti][None].reshape(cm, h, w), x, y)
                    out[qi, mi * cm:(mi + 1) * cm] += weights[qi, mi, ti, ki] * val
    return out


def ssim_oracle(a, b, window, c1, c2):
    """Direct sliding-window SSIM with explicit per-window loops."""
    vals = []
    size = window.shape[0]
    for ch in range(a.shape[0]):
        x, y = a[ch], b[ch]
        for i in range(a.shape[1] - size + 1):
            for j in range(a.shape[2] - size + 1):
                wx = x[i:i + size, j:j + size]
                wy = y[i:i + size, j:j + size]
                mx = (window * wx).sum()
                my = (window * wy).sum()
                vx = (window * wx * wx).sum() - mx * mx
                vy = (window * wy * wy).sum() - my * my
                vxy = (window * wx * wy).sum() - mx * my
                vals.append(((2 * mx * my + c1) * (2 * vxy + c2))
                            / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def randomize_params(model, rng, scale=0.1):
    """Replace every parameter with small random float64 values (so
    zero-initialized heads get gradients checked away from kinks)."""
    for p in model.params():
        p.data = rng.normal(0.0, scale, size=p.data.shape)


def model_to_float64(model):
    for p in model.params():
        p.data = p.data.astype(np.float64)


def rand_tensor(rng, shape, requires_grad=True, scale=1.0):
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=requires_grad)
