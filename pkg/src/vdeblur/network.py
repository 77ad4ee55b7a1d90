"""Encoder, motion estimator, attention fusion and decoder, assembled into
the full restoration network and its two-stage cascade."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import MultiToMultiAttention, MultiToSingleAttention
from .layers import Conv2d, ConvTranspose2d, Layer, ResidualBlock
from .ops import leaky_relu
from .tensor import Tensor, concat, stack
from .warp import FlowSet, zero_flows


@dataclass
class NetworkConfig:
    channels: int = 16          # bottleneck width C (must divide by 4 and by heads)
    heads: int = 4              # attention heads M
    points: int = 12            # sampling points per head and frame K
    frames: int = 3             # window length T
    res_blocks: int = 3
    leaky_slope: float = 0.1
    use_flow: bool = True       # feed estimated flows as base sampling offsets

    def __post_init__(self):
        if self.channels % 4:
            raise ValueError("channels must be divisible by 4 (two stride-2 stages)")
        if self.channels % self.heads:
            raise ValueError("channels must be divisible by heads")
        if self.frames != 3:
            raise ValueError("the base network operates on 3-frame windows")
        if min(self.channels, self.heads, self.points) < 1:
            raise ValueError("channels, heads and points must be positive")


class FeatureExtractor(Layer):
    """Three conv blocks (strides 1, 2, 2), each followed by residual blocks;
    channel widths C/4 -> C/2 -> C. All frames share the weights."""

    def __init__(self, cfg, rng, dtype=np.float32):
        c, s = cfg.channels, cfg.leaky_slope
        self.entry1 = Conv2d(3, c // 4, 3, stride=1, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res1 = [ResidualBlock(c // 4, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.entry2 = Conv2d(c // 4, c // 2, 3, stride=2, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res2 = [ResidualBlock(c // 2, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.entry3 = Conv2d(c // 2, c, 3, stride=2, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res3 = [ResidualBlock(c, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.slope = s

    def __call__(self, frames):
        """frames: [N,3,H,W] with H, W divisible by 4 -> [N,C,H/4,W/4]."""
        h, w = frames.shape[2], frames.shape[3]
        if h % 4 or w % 4:
            raise ValueError("frame dims must be divisible by 4")
        x = leaky_relu(self.entry1(frames), self.slope)
        for r in self.res1:
            x = r(x)
        x = leaky_relu(self.entry2(x), self.slope)
        for r in self.res2:
            x = r(x)
        x = leaky_relu(self.entry3(x), self.slope)
        for r in self.res3:
            x = r(x)
        return x


class MotionEstimator(Layer):
    """Four stacked 3x3 stride-1 convs mapping the concatenated frame
    features to four 2-channel flows at feature resolution. The final layer
    is zero-initialized so training starts from zero flow."""

    def __init__(self, cfg, rng, dtype=np.float32):
        c, s = cfg.channels, cfg.leaky_slope
        self.conv1 = Conv2d(3 * c, c, 3, padding=1, rng=rng, dtype=dtype, slope=s)
        self.conv2 = Conv2d(c, c // 2, 3, padding=1, rng=rng, dtype=dtype, slope=s)
        self.conv3 = Conv2d(c // 2, c // 4, 3, padding=1, rng=rng, dtype=dtype, slope=s)
        self.conv4 = Conv2d(c // 4, 8, 3, padding=1, dtype=dtype, zero_init=True)
        self.slope = s

    def __call__(self, features):
        x = concat(list(features), axis=0).reshape(1, -1, features[0].shape[1], features[0].shape[2])
        x = leaky_relu(self.conv1(x), self.slope)
        x = leaky_relu(self.conv2(x), self.slope)
        x = leaky_relu(self.conv3(x), self.slope)
        out = self.conv4(x)[0]
        return FlowSet(prev_to_mid=out[0:2], mid_to_prev=out[2:4],
                       mid_to_next=out[4:6], next_to_mid=out[6:8])


class Reconstructor(Layer):
    """Two (stride-2 deconv + residual blocks) stages, one stride-1 conv
    stage, then a zero-initialized 3-channel conv. The result is added to
    the blurry mid-frame, so an untrained net is the identity."""

    def __init__(self, cfg, rng, dtype=np.float32):
        c, s = cfg.channels, cfg.leaky_slope
        self.up1 = ConvTranspose2d(c, c // 2, 4, stride=2, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res1 = [ResidualBlock(c // 2, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.up2 = ConvTranspose2d(c // 2, c // 4, 4, stride=2, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res2 = [ResidualBlock(c // 4, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.conv3 = Conv2d(c // 4, c // 4, 3, padding=1, rng=rng, dtype=dtype, slope=s)
        self.res3 = [ResidualBlock(c // 4, rng, dtype, s) for _ in range(cfg.res_blocks)]
        self.final = Conv2d(c // 4, 3, 3, padding=1, dtype=dtype, zero_init=True)
        self.slope = s

    def __call__(self, fused, blurry_mid):
        x = fused.reshape(1, *fused.shape)
        x = leaky_relu(self.up1(x), self.slope)
        for r in self.res1:
            x = r(x)
        x = leaky_relu(self.up2(x), self.slope)
        for r in self.res2:
            x = r(x)
        x = leaky_relu(self.conv3(x), self.slope)
        for r in self.res3:
            x = r(x)
        return self.final(x)[0] + blurry_mid


class DeblurNet(Layer):
    """Restores the sharp mid-frame of a 3-frame blurry window."""

    def __init__(self, cfg, rng=None, dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        elif isinstance(rng, int):
            rng = np.random.default_rng(rng)
        self.encoder = FeatureExtractor(cfg, rng, dtype)
        self.motion = MotionEstimator(cfg, rng, dtype)
        self.mma = MultiToMultiAttention(cfg.channels, cfg.heads, cfg.points,
                                         cfg.frames, rng, dtype, cfg.leaky_slope)
        self.msa = MultiToSingleAttention(cfg.channels, cfg.heads, cfg.points,
                                          cfg.frames, rng, dtype, cfg.leaky_slope)
        self.decoder = Reconstructor(cfg, rng, dtype)
        self.cfg = cfg
        self.dtype = dtype

    def forward(self, frames, return_attention=False):
        """frames: [prev, mid, next] tensors [3,H,W] in [0,1].

        Returns (restored mid-frame, FlowSet) and, on request, the
        mid-frame attention weights of the final aggregation layer.
        """
        if len(frames) != 3:
            raise ValueError("forward expects a 3-frame window")
        feats = self.encoder(stack(list(frames), axis=0))
        features = [feats[i] for i in range(3)]
        if self.cfg.use_flow:
            flows = self.motion(features)
        else:
            flows = zero_flows(features[0].shape[1], features[0].shape[2], self.dtype)
        refreshed = self.mma(features, flows)
        if return_attention:
            fused, attn = self.msa(refreshed, flows, return_attention=True)
        else:
            fused = self.msa(refreshed, flows)
        restored = self.decoder(fused, frames[1])
        if return_attention:
            return restored, flows, attn
        return restored, flows

    def __call__(self, frames):
        return self.forward(frames)


class CascadedDeblurNet(Layer):
    """Two-pass progressive restoration over a 5-frame window.

    Stage 1 restores the three overlapping triplets; stage 2 restores the
    mid-frame from those restorations. By default both stages share one
    parameter set; pass share_weights=False for two independent sets.
    """

    def __init__(self, cfg, rng=None, dtype=np.float32, share_weights=True):
        if rng is None:
            rng = np.random.default_rng(0)
        elif isinstance(rng, int):
            rng = np.random.default_rng(rng)
        self.stage1 = DeblurNet(cfg, rng, dtype)
        self.stage2 = None if share_weights else DeblurNet(cfg, rng, dtype)
        self.cfg = cfg

    @property
    def second_stage(self):
        return self.stage2 if self.stage2 is not None else self.stage1

    def forward(self, frames, return_attention=False):
        """frames: 5 tensors [3,H,W]. Returns (restored mid-frame,
        intermediate restorations, flow sets of all four applications)."""
        if len(frames) != 5:
            raise ValueError("cascaded forward expects a 5-frame window")
        intermediates = []
        flow_sets = []
        for s in range(3):
            r, fl = self.stage1.forward(frames[s:s + 3])
            intermediates.append(r)
            flow_sets.append(fl)
        if return_attention:
            final, fl, attn = self.second_stage.forward(intermediates, return_attention=True)
            flow_sets.append(fl)
            return final, intermediates, flow_sets, attn
        final, fl = self.second_stage.forward(intermediates)
        flow_sets.append(fl)
        return final, intermediates, flow_sets

    def __call__(self, frames):
        return self.forward(frames)


def clamp01(image):
    """Clamp a restored image to [0,1]; inference-time only (not recorded)."""
    arr = image.data if isinstance(image, Tensor) else image
    return np.clip(arr, 0.0, 1.0)
