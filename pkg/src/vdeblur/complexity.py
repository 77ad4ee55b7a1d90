"""Analytic multiply-accumulate counts for one forward pass of the network.

Convolutions count Cout*Cin*kh*kw*Hout*Wout, transposed convolutions the
same formula over their input positions, and the deformable attention core
Q*M*T*K*(4+1)*(C/M) sampling-and-blend MACs plus its per-query projection.
Counts are per 3-frame window (batch of one).
"""

from __future__ import annotations


def conv_macs(cin, cout, k, oh, ow):
    return cout * cin * k * k * oh * ow


def deconv_macs(cin, cout, k, ih, iw):
    return cin * cout * k * k * ih * iw


def attention_core_macs(q, heads, frames, points, channels):
    per_head = channels // heads
    sample_blend = q * heads * frames * points * 5 * per_head
    projection = q * channels * channels
    return sample_blend + projection


def warp_macs(channels, h, w):
    # 4-corner blend: 4 blend MACs + 1 accumulate per output value
    return channels * h * w * 5


def count_macs(cfg, image_hw):
    """Per-layer MAC counts for a DeblurNet forward at the given image dims.

    Returns (layers, total) where layers is a list of (name, macs).
    """
    h_img, w_img = image_hw
    if h_img % 4 or w_img % 4:
        raise ValueError("image dims must be divisible by 4")
    c = cfg.channels
    m, t, k = cfg.heads, cfg.frames, cfg.points
    h2, w2 = h_img // 2, w_img // 2
    h4, w4 = h_img // 4, w_img // 4
    rb = cfg.res_blocks
    layers = []

    def add(name, macs):
        layers.append((name, macs))

    # encoder, shared across the T frames
    add("encoder.entry1", t * conv_macs(3, c // 4, 3, h_img, w_img))
    add("encoder.res1", t * rb * 2 * conv_macs(c // 4, c // 4, 3, h_img, w_img))
    add("encoder.entry2", t * conv_macs(c // 4, c // 2, 3, h2, w2))
    add("encoder.res2", t * rb * 2 * conv_macs(c // 2, c // 2, 3, h2, w2))
    add("encoder.entry3", t * conv_macs(c // 2, c, 3, h4, w4))
    add("encoder.res3", t * rb * 2 * conv_macs(c, c, 3, h4, w4))

    if cfg.use_flow:
        add("motion.conv1", conv_macs(3 * c, c, 3, h4, w4))
        add("motion.conv2", conv_macs(c, c // 2, 3, h4, w4))
        add("motion.conv3", conv_macs(c // 2, c // 4, 3, h4, w4))
        add("motion.conv4", conv_macs(c // 4, 8, 3, h4, w4))

    cond = (2 * t - 1) * c
    q_multi = t * h4 * w4
    add("mma.warps", 2 * warp_macs(c, h4, w4))
    add("mma.offset_conv", conv_macs(cond, t * m * t * k * 2, 3, h4, w4))
    add("mma.attn_conv", conv_macs(cond, t * m * t * k, 3, h4, w4))
    add("mma.value_conv", t * conv_macs(c, c, 3, h4, w4))
    add("mma.attention", attention_core_macs(q_multi, m, t, k, c))
    add("mma.out_conv", t * conv_macs(c, c, 3, h4, w4))

    q_single = h4 * w4
    add("msa.warps", 2 * warp_macs(c, h4, w4))
    add("msa.offset_conv", conv_macs(cond, m * t * k * 2, 3, h4, w4))
    add("msa.attn_conv", conv_macs(cond, m * t * k, 3, h4, w4))
    add("msa.value_conv", t * conv_macs(c, c, 3, h4, w4))
    add("msa.attention", attention_core_macs(q_single, m, t, k, c))
    add("msa.out_conv", conv_macs(c, c, 3, h4, w4))

    add("decoder.up1", deconv_macs(c, c // 2, 4, h4, w4))
    add("decoder.res1", rb * 2 * conv_macs(c // 2, c // 2, 3, h2, w2))
    add("decoder.up2", deconv_macs(c // 2, c // 4, 4, h2, w2))
    add("decoder.res2", rb * 2 * conv_macs(c // 4, c // 4, 3, h_img, w_img))
    add("decoder.conv3", conv_macs(c // 4, c // 4, 3, h_img, w_img))
    add("decoder.res3", rb * 2 * conv_macs(c // 4, c // 4, 3, h_img, w_img))
    add("decoder.final", conv_macs(c // 4, 3, 3, h_img, w_img))

    total = sum(macs for _, macs in layers)
    return layers, total


def gmacs(cfg, image_hw):
    """Total count in units of 1e9 MACs."""
    return count_macs(cfg, image_hw)[1] / 1e9


def format_report(cfg, image_hw):
    layers, total = count_macs(cfg, image_hw)
    width = max(len(name) for name, _ in layers)
    lines = [f"{'layer':<{width}}  {'MACs':>15}  {'GMACs':>10}"]
    for name, macs in layers:
        lines.append(f"{name:<{width}}  {macs:>15,}  {macs / 1e9:>10.4f}")
    lines.append(f"{'total':<{width}}  {total:>15,}  {total / 1e9:>10.4f}")
    return "\n".join(lines)
