"""Deformable attention over space and adjacent frames.

Queries are pixels (ordered frame-major, then row-major); each query/head
pair carries K continuous sampling points into every frame's value features.
Attention weights are softmax-normalized jointly over the (frame, point)
group, so each query distributes exactly unit mass across all T*K samples.
Coarse optical flows enter as base offsets added onto the learned sampling
offsets, anchoring sampling near corresponding pixels in the other frames.
"""

from __future__ import annotations

import numpy as np

from .ops import linear
from .tensor import Tensor, concat
from .warp import corner_weights

NORMALIZATION_TOL = 1e-6


def reference_points(n_frames, h, w, dtype=np.float32):
    """(x, y) pixel centers for frame-major query ordering -> [n_frames*h*w, 2]."""
    ys, xs = np.mgrid[0:h, 0:w]
    one = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(dtype)
    return np.tile(one, (n_frames, 1))


def phi(offsets, base, query_frames):
    """Add per-(query frame, value frame) base displacements onto offsets.

    offsets: [Q,M,T,K,2] with Q = len(query_frames)*H*W. base is a nested
    list, base[qi][t], holding a [2,H,W] flow tensor for each pair or None on
    the diagonal (query_frames[qi] == t), which stands for the zero field.
    Reference-point addition is not done here; it happens inside the
    attention function itself.
    """
    n_qf = len(query_frames)
    if len(base) != n_qf:
        raise ValueError(f"phi: expected {n_qf} base rows, got {len(base)}")
    t_frames = offsets.shape[2]
    q = offsets.shape[0]
    hw = q // n_qf
    rows = []
    for qi, frame in enumerate(query_frames):
        if len(base[qi]) != t_frames:
            raise ValueError(f"phi: base row {qi} has {len(base[qi])} entries, expected {t_frames}")
        cells = []
        for t, flow in enumerate(base[qi]):
            if flow is None:
                if t != frame:
                    raise ValueError(f"phi: missing base flow for pair ({frame}->{t})")
                cells.append(Tensor(np.zeros((hw, 1, 1, 1, 2), dtype=offsets.dtype)))
            else:
                cells.append(flow.transpose(1, 2, 0).reshape(hw, 1, 1, 1, 2))
        rows.append(concat(cells, axis=2))  # [HW,1,T,1,2]
    return offsets + concat(rows, axis=0)


def deform_attn_core(values, positions, weights, heads):
    """Weighted bilinear gathering across frames, split into attention heads.

    values: [T,C,H,W] (channels partitioned into `heads` contiguous groups),
    positions: [Q,M,T,K,2] absolute (x, y) sampling coordinates,
    weights: [Q,M,T,K]. Returns [Q,C] with head outputs concatenated along
    channels. Differentiable w.r.t. all three tensor inputs.
    """
    t_frames, c, h, w = values.shape
    q, m, t_pos, k = weights.shape
    if m != heads:
        raise ValueError(f"deform_attn_core: weights have {m} heads, expected {heads}")
    if t_pos != t_frames:
        raise ValueError("deform_attn_core: frame axes of values and weights disagree")
    if positions.shape != (q, m, t_frames, k, 2):
        raise ValueError(f"deform_attn_core: positions shape {positions.shape} inconsistent")
    if c % heads:
        raise ValueError(f"deform_attn_core: {c} channels not divisible by {heads} heads")
    cm = c // heads

    # per-(frame, head) planes with channels last, flattened for row gathers
    vw = np.ascontiguousarray(
        values.data.reshape(t_frames, heads, cm, h, w).transpose(0, 1, 3, 4, 2))
    rows = vw.reshape(t_frames * heads * h * w, cm)
    px, py = positions.data[..., 0], positions.data[..., 1]
    x0, x1, y0, y1, wx, wy, inx, iny = corner_weights(px, py, h, w)

    # flat row index per sample: ((t * M + m) * H + y) * W + x
    tm = (np.arange(t_frames)[None, None, :, None] * heads
          + np.arange(heads)[None, :, None, None]) * (h * w)
    lin00 = tm + y0 * w + x0
    lin01 = tm + y0 * w + x1
    lin10 = tm + y1 * w + x0
    lin11 = tm + y1 * w + x1
    shape5 = (q, heads, t_frames, k, cm)
    g00 = np.take(rows, lin00.ravel(), axis=0).reshape(shape5)
    g01 = np.take(rows, lin01.ravel(), axis=0).reshape(shape5)
    g10 = np.take(rows, lin10.ravel(), axis=0).reshape(shape5)
    g11 = np.take(rows, lin11.ravel(), axis=0).reshape(shape5)
    w00 = ((1 - wx) * (1 - wy))[..., None]
    w01 = (wx * (1 - wy))[..., None]
    w10 = ((1 - wx) * wy)[..., None]
    w11 = (wx * wy)[..., None]
    samp = w00 * g00 + w01 * g01 + w10 * g10 + w11 * g11
    out = (weights.data[..., None] * samp).sum(axis=(2, 3)).reshape(q, c)

    need_v = values.requires_grad
    need_p = positions.requires_grad
    need_w = weights.requires_grad

    def vjp(g):
        gqm = g.reshape(q, heads, 1, 1, cm)
        gv = gp = gw = None
        if need_w:
            gw = (gqm * samp).sum(axis=-1)
        dsamp = weights.data[..., None] * gqm
        if need_v:
            n_rows = t_frames * heads * h * w
            acc = np.zeros((n_rows, cm))
            for lin, cw in ((lin00, w00), (lin01, w01), (lin10, w10), (lin11, w11)):
                flat = lin.ravel()
                vals = (cw * dsamp).reshape(-1, cm)
                for ch in range(cm):
                    acc[:, ch] += np.bincount(flat, weights=vals[:, ch], minlength=n_rows)
            gv = (acc.astype(g.dtype).reshape(t_frames, heads, h, w, cm)
                  .transpose(0, 1, 4, 2, 3).reshape(values.shape))
        if need_p:
            wxe, wye = wx[..., None], wy[..., None]
            dwx = (dsamp * ((1 - wye) * (g01 - g00) + wye * (g11 - g10))).sum(axis=-1)
            dwy = (dsamp * ((1 - wxe) * (g10 - g00) + wxe * (g11 - g01))).sum(axis=-1)
            gp = np.stack([dwx * inx, dwy * iny], axis=-1)
        return gv, gp, gw

    return Tensor._make(out, (values, positions, weights), vjp, "deform_attn_core")


def check_normalized(weights, tol=NORMALIZATION_TOL):
    """Raise unless attention weights are non-negative and their (frame,
    point) group sums equal 1 per (query, head)."""
    if weights.data.min() < 0:
        raise ValueError("attention weights must be non-negative")
    sums = weights.data.sum(axis=(2, 3), dtype=np.float64)
    err = np.abs(sums - 1.0).max()
    if err > tol:
        raise ValueError(f"attention weights not normalized: max group-sum error {err:.3g}")


def deformable_attention(weights, offsets, values, out_weight, out_bias):
    """Full attention map: gather-blend per head, then per-query projection.

    weights: [Q,M,T,K] normalized over (T,K); offsets: [Q,M,T,K,2] sampling
    displacements (base offsets already folded in); values: [T,C,H,W];
    out_weight/out_bias: [C,C] / [C] output projection (a 1x1-conv
    equivalent applied per query). Queries are ordered frame-major and each
    query's reference point is its own pixel center, added here.
    """
    check_normalized(weights)
    t_frames, c, h, w = values.shape
    q = weights.shape[0]
    n_qf, rem = divmod(q, h * w)
    if rem:
        raise ValueError("deformable_attention: query count is not a multiple of H*W")
    ref = reference_points(n_qf, h, w, dtype=offsets.dtype)
    positions = offsets + Tensor(ref[:, None, None, None, :])
    heads = weights.shape[1]
    gathered = deform_attn_core(values, positions, weights, heads)
    return linear(gathered, out_weight, out_bias)
