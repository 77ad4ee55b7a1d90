"""Multi-frame feature aggregation with deformable attention.

Two layers work coarse-to-fine: the multi-to-multi layer lets every frame's
pixels pull sharp information from all frames (Q = T*H*W queries), the
multi-to-single layer then aggregates into the mid-frame only (Q = H*W).
Both condition their offset/attention heads on a 5-map concatenation: the
two side features warped onto the mid-frame followed by the three unwarped
features. Offset and attention-logit heads start at zero so training begins
from unmoved sampling points and uniform attention.
"""

from __future__ import annotations

import numpy as np

from .attention import deformable_attention, phi
from .layers import Conv2d, Layer, Linear
from .ops import softmax
from .tensor import Tensor, concat, stack
from .warp import backward_warp, compose_flows


def _head_fields(raw, n_qframes, heads, frames, points, trailing):
    """Reshape a head conv output [1, n_qframes*M*T*K*(trailing), H, W] into
    query-major [(qf,y,x), M, T, K(, trailing)] order."""
    h, w = raw.shape[2], raw.shape[3]
    q = n_qframes * h * w
    if trailing == 1:
        t = raw.reshape(n_qframes, heads, frames, points, h, w)
        return t.transpose(0, 4, 5, 1, 2, 3).reshape(q, heads, frames, points)
    t = raw.reshape(n_qframes, heads, frames, points, trailing, h, w)
    return t.transpose(0, 5, 6, 1, 2, 3, 4).reshape(q, heads, frames, points, trailing)


class MultiToMultiAttention(Layer):
    """Every frame queries all frames; returns one refreshed map per frame."""

    def __init__(self, channels, heads, points, frames=3, rng=None,
                 dtype=np.float32, slope=0.1):
        if channels % heads:
            raise ValueError("channels must be divisible by the head count")
        cond = (2 * frames - 1) * channels
        n_off = frames * heads * frames * points * 2
        n_attn = frames * heads * frames * points
        self.offset_conv = Conv2d(cond, n_off, 3, padding=1, dtype=dtype, zero_init=True)
        self.attn_conv = Conv2d(cond, n_attn, 3, padding=1, dtype=dtype, zero_init=True)
        self.value_conv = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.attn_proj = Linear(channels, channels, rng=rng, dtype=dtype, slope=slope)
        self.out_conv = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.heads = heads
        self.points = points
        self.frames = frames

    def __call__(self, features, flows):
        """features: [prev, mid, next] tensors [C,H,W]; flows: FlowSet."""
        if len(features) != self.frames:
            raise ValueError(f"expected {self.frames} feature maps, got {len(features)}")
        c, h, w = features[0].shape
        warped_prev = backward_warp(features[0], flows.mid_to_prev)
        warped_next = backward_warp(features[2], flows.mid_to_next)
        cond = concat([warped_prev, warped_next] + list(features), axis=0).reshape(1, -1, h, w)

        offsets = _head_fields(self.offset_conv(cond), self.frames, self.heads,
                               self.frames, self.points, 2)
        logits = _head_fields(self.attn_conv(cond), self.frames, self.heads,
                              self.frames, self.points, 1)
        attn = softmax(logits, axes=(2, 3))
        values = self.value_conv(stack(features, axis=0))

        # queries in side frames may sample the opposite side; chain the
        # adjacent flows to cover the (prev<->next) pairs
        prev_to_next = compose_flows(flows.prev_to_mid, flows.mid_to_next)
        next_to_prev = compose_flows(flows.next_to_mid, flows.mid_to_prev)
        base = [
            [None, flows.prev_to_mid, prev_to_next],
            [flows.mid_to_prev, None, flows.mid_to_next],
            [next_to_prev, flows.next_to_mid, None],
        ]
        sampling = phi(offsets, base, query_frames=(0, 1, 2))

        fused = deformable_attention(attn, sampling, values,
                                     self.attn_proj.weight, self.attn_proj.bias)
        per_frame = fused.reshape(self.frames, h, w, c).transpose(0, 3, 1, 2)
        out = self.out_conv(per_frame)
        return [out[i] for i in range(self.frames)]


class MultiToSingleAttention(Layer):
    """Only mid-frame pixels query all frames; returns the fused mid map."""

    def __init__(self, channels, heads, points, frames=3, rng=None,
                 dtype=np.float32, slope=0.1):
        if channels % heads:
            raise ValueError("channels must be divisible by the head count")
        cond = (2 * frames - 1) * channels
        self.offset_conv = Conv2d(cond, heads * frames * points * 2, 3, padding=1,
                                  dtype=dtype, zero_init=True)
        self.attn_conv = Conv2d(cond, heads * frames * points, 3, padding=1,
                                dtype=dtype, zero_init=True)
        self.value_conv = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.attn_proj = Linear(channels, channels, rng=rng, dtype=dtype, slope=slope)
        self.out_conv = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.heads = heads
        self.points = points
        self.frames = frames

    def __call__(self, features, flows, return_attention=False):
        c, h, w = features[0].shape
        warped_prev = backward_warp(features[0], flows.mid_to_prev)
        warped_next = backward_warp(features[2], flows.mid_to_next)
        cond = concat([warped_prev, warped_next] + list(features), axis=0).reshape(1, -1, h, w)

        offsets = _head_fields(self.offset_conv(cond), 1, self.heads, self.frames, self.points, 2)
        logits = _head_fields(self.attn_conv(cond), 1, self.heads, self.frames, self.points, 1)
        attn = softmax(logits, axes=(2, 3))
        values = self.value_conv(stack(features, axis=0))

        base = [[flows.mid_to_prev, None, flows.mid_to_next]]
        sampling = phi(offsets, base, query_frames=(1,))

        fused = deformable_attention(attn, sampling, values,
                                     self.attn_proj.weight, self.attn_proj.bias)
        mid = self.out_conv(fused.reshape(1, h, w, c).transpose(0, 3, 1, 2))[0]
        if return_attention:
            return mid, attn
        return mid


def export_attention_maps(attn, h, w):
    """Collapse mid-frame attention [H*W,M,T,K] into one heatmap per source
    frame: heatmap_t(p) = mean_m sum_k A[p,m,t,k]. The T maps are
    non-negative and sum to 1 at every pixel."""
    a = attn.data if isinstance(attn, Tensor) else np.asarray(attn)
    if a.shape[0] != h * w:
        raise ValueError("attention query count does not match the given dims")
    maps = a.sum(axis=3).mean(axis=1)  # [HW,T]
    return np.ascontiguousarray(maps.T.reshape(a.shape[2], h, w))
