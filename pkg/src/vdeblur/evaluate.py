"""Checkpoint evaluation: sliding-window restoration and PSNR/SSIM tables."""

from __future__ import annotations

import numpy as np

from .metrics import psnr, ssim
from .network import clamp01
from .tensor import Tensor, no_grad


def window_indices(center, n, half):
    """Clamped neighbor indices: boundary frames repeat the edge frame."""
    return [min(max(i, 0), n - 1) for i in range(center - half, center + half + 1)]


def restore_frame(model, frames, center, stack=False, return_attention=False):
    """Restore one frame of a sequence (list of [3,H,W] arrays in [0,1])."""
    half = 2 if stack else 1
    idx = window_indices(center, len(frames), half)
    window = [Tensor(frames[i]) for i in idx]
    with no_grad():
        if stack:
            if return_attention:
                out, _, _, attn = model.forward(window, return_attention=True)
            else:
                out, _, _ = model.forward(window)
        else:
            if return_attention:
                out, _, attn = model.forward(window, return_attention=True)
            else:
                out, _ = model.forward(window)
    restored = clamp01(out)
    if return_attention:
        return restored, attn
    return restored


def evaluate_sequence(model, seq, stack=False):
    """Mean PSNR/SSIM of restorations vs sharp frames, plus the blurry-input
    baseline for delta reporting."""
    rows = {"psnr": [], "ssim": [], "psnr_blur": [], "ssim_blur": []}
    for i in range(len(seq.blurry)):
        restored = restore_frame(model, seq.blurry, i, stack=stack)
        sharp = seq.sharp[i]
        rows["psnr"].append(psnr(restored, sharp))
        rows["ssim"].append(ssim(restored, sharp))
        rows["psnr_blur"].append(psnr(seq.blurry[i], sharp))
        rows["ssim_blur"].append(ssim(seq.blurry[i], sharp))
    return {k: float(np.mean(v)) for k, v in rows.items()}


def evaluate_dataset(model, sequences, stack=False):
    """Per-sequence metric rows plus their aggregate mean."""
    per_seq = {}
    for seq in sequences:
        per_seq[seq.name] = evaluate_sequence(model, seq, stack=stack)
    keys = ["psnr", "ssim", "psnr_blur", "ssim_blur"]
    aggregate = {k: float(np.mean([row[k] for row in per_seq.values()])) for k in keys}
    return per_seq, aggregate


def format_table(per_seq, aggregate):
    name_w = max(len("sequence"), max((len(n) for n in per_seq), default=8))
    header = (f"{'sequence':<{name_w}}  {'PSNR':>8}  {'SSIM':>7}  "
              f"{'PSNR(blur)':>10}  {'SSIM(blur)':>10}")
    lines = [header]
    for name, row in per_seq.items():
        lines.append(f"{name:<{name_w}}  {row['psnr']:>8.2f}  {row['ssim']:>7.4f}  "
                     f"{row['psnr_blur']:>10.2f}  {row['ssim_blur']:>10.4f}")
    lines.append(f"{'mean':<{name_w}}  {aggregate['psnr']:>8.2f}  {aggregate['ssim']:>7.4f}  "
                 f"{aggregate['psnr_blur']:>10.2f}  {aggregate['ssim_blur']:>10.4f}")
    return "\n".join(lines)
