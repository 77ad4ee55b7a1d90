"""Training objectives: restoration error plus an unsupervised warp loss
that teaches the motion estimator to align downsampled sharp frames."""

from __future__ import annotations

from .warp import backward_warp


def mse_loss(restored, sharp):
    """Mean of elementwise squared differences (mean, not sum, so the
    magnitude is invariant to crop size)."""
    if restored.shape != sharp.shape:
        raise ValueError(f"mse_loss: shape mismatch {restored.shape} vs {sharp.shape}")
    diff = restored - sharp
    return (diff * diff).mean()


def warp_loss(sharp_down, flows):
    """Photometric alignment error of the four estimated flows.

    sharp_down: [prev, mid, next] downsampled sharp frames at flow
    resolution. For each flow src->dst the source frame is compared against
    the backward-warped destination frame; the four terms are averaged.
    Gradients reach the motion estimator only through the flows.
    """
    s_prev, s_mid, s_next = sharp_down
    pairs = [
        (s_prev, s_mid, flows.prev_to_mid),
        (s_mid, s_prev, flows.mid_to_prev),
        (s_mid, s_next, flows.mid_to_next),
        (s_next, s_mid, flows.next_to_mid),
    ]
    total = None
    for src, dst, flow in pairs:
        if flow is None:
            raise ValueError("warp_loss: missing flow")
        term = mse_loss(src, backward_warp(dst, flow))
        total = term if total is None else total + term
    return total / len(pairs)


def total_loss(mse, warp, gamma):
    """mse + gamma * warp; exactly linear in gamma."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return mse + gamma * warp
