"""Bilinear sampling, flow-based backward warping, flow composition, resize.

Flow fields are [2,H,W] tensors: channel 0 is the horizontal displacement
(+x rightward), channel 1 vertical (+y downward), in pixels at the map's own
resolution. Out-of-range sample coordinates are clamped to the border
(replication), which keeps value gradients alive near edges; coordinate
gradients vanish once a point is clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


def corner_weights(px, py, h, w):
    """Clamped corner indices and blend weights for bilinear lookups.

    Returns (x0, x1, y0, y1, wx, wy, inx, iny) where inx/iny are 1 where the
    raw coordinate is strictly inside (0, dim-1) so clamping passes gradients
    through, else 0.
    """
    cx = np.clip(px, 0.0, w - 1.0)
    cy = np.clip(py, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(cx).astype(np.intp), w - 1)
    y0 = np.minimum(np.floor(cy).astype(np.intp), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    # keep the working dtype: int64 minus float32 would promote to float64
    wx = cx - x0.astype(cx.dtype)
    wy = cy - y0.astype(cy.dtype)
    inx = ((px > 0) & (px < w - 1)).astype(px.dtype)
    iny = ((py > 0) & (py < h - 1)).astype(py.dtype)
    return x0, x1, y0, y1, wx, wy, inx, iny


def bilinear_sample(feature, points):
    """Sample [C,H,W] features at continuous (x, y) points -> [C,Q].

    Standard 4-neighbor bilinear blend with border clamping; differentiable
    w.r.t. both the feature values and the point coordinates. Integer points
    reduce to exact lookups.
    """
    if feature.ndim != 3 or points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("bilinear_sample expects feature [C,H,W] and points [Q,2]")
    c, h, w = feature.shape
    f = feature.data
    px, py = points.data[:, 0], points.data[:, 1]
    x0, x1, y0, y1, wx, wy, inx, iny = corner_weights(px, py, h, w)

    g00 = f[:, y0, x0]
    g01 = f[:, y0, x1]
    g10 = f[:, y1, x0]
    g11 = f[:, y1, x1]
    out = (1 - wy) * ((1 - wx) * g00 + wx * g01) + wy * ((1 - wx) * g10 + wx * g11)

    need_f, need_p = feature.requires_grad, points.requires_grad

    def vjp(g):
        gf = gp = None
        if need_f:
            buf = np.zeros((h * w, c), dtype=g.dtype)
            lin00 = y0 * w + x0
            lin01 = y0 * w + x1
            lin10 = y1 * w + x0
            lin11 = y1 * w + x1
            np.add.at(buf, lin00, ((1 - wx) * (1 - wy) * g).T)
            np.add.at(buf, lin01, (wx * (1 - wy) * g).T)
            np.add.at(buf, lin10, ((1 - wx) * wy * g).T)
            np.add.at(buf, lin11, (wx * wy * g).T)
            gf = buf.T.reshape(c, h, w)
        if need_p:
            dwx = (g * ((1 - wy) * (g01 - g00) + wy * (g11 - g10))).sum(axis=0)
            dwy = (g * ((1 - wx) * (g10 - g00) + wx * (g11 - g01))).sum(axis=0)
            gp = np.stack([dwx * inx, dwy * iny], axis=1)
        return gf, gp

    return Tensor._make(out, (feature, points), vjp, "bilinear_sample")


def _pixel_grid(h, w, dtype):
    ys, xs = np.mgrid[0:h, 0:w]
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(dtype)


def backward_warp(feature, flow):
    """Resample features at positions displaced by a flow field.

    output(x, y) = feature(x + flow_x(x, y), y + flow_y(x, y)), bilinearly
    interpolated with border clamping. With zero flow this is exactly the
    identity. Differentiable w.r.t. both arguments.
    """
    if feature.ndim != 3 or flow.shape[0] != 2:
        raise ValueError("backward_warp expects feature [C,H,W] and flow [2,H,W]")
    c, h, w = feature.shape
    if flow.shape[1] != h or flow.shape[2] != w:
        raise ValueError(f"backward_warp: flow spatial dims {flow.shape[1:]} != feature {(h, w)}")
    grid = Tensor(_pixel_grid(h, w, feature.dtype))
    points = flow.transpose(1, 2, 0).reshape(h * w, 2) + grid
    return bilinear_sample(feature, points).reshape(c, h, w)


def compose_flows(first, second):
    """Chain displacements: result(p) = first(p) + second(p + first(p)).

    `first` maps frame a to frame b, `second` frame b to frame c; the result
    maps a to c. Plain addition would mislocate the second displacement.
    """
    if first.shape != second.shape:
        raise ValueError("compose_flows: shape mismatch")
    return first + backward_warp(second, first)


@dataclass
class FlowSet:
    """The four adjacent-pair flows of a 3-frame window.

    Each field is a [2,H,W] tensor named source->target: the field lives on
    the source frame's grid and points at corresponding positions in the
    target frame (the displacement a backward warp of the target needs).
    """

    prev_to_mid: Tensor
    mid_to_prev: Tensor
    mid_to_next: Tensor
    next_to_mid: Tensor

    def all(self):
        return [self.prev_to_mid, self.mid_to_prev, self.mid_to_next, self.next_to_mid]


def zero_flows(h, w, dtype=np.float32):
    """A FlowSet of zero fields (used when flow guidance is disabled)."""
    return FlowSet(*(Tensor(np.zeros((2, h, w), dtype=dtype)) for _ in range(4)))


def resize_bilinear(image, factor):
    """Bilinear resampling with the align-corners-false convention."""
    c, h, w = image.shape
    oh = int(round(h * factor))
    ow = int(round(w * factor))
    if oh < 1 or ow < 1:
        raise ValueError("resize_bilinear: target dims must be >= 1")
    sy = h / oh
    sx = w / ow
    ys, xs = np.mgrid[0:oh, 0:ow]
    px = (xs.ravel() + 0.5) * sx - 0.5
    py = (ys.ravel() + 0.5) * sy - 0.5
    points = Tensor(np.stack([px, py], axis=1).astype(image.dtype))
    return bilinear_sample(image, points).reshape(c, oh, ow)
