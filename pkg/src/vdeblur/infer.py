"""Batch inference over a directory of frames, with optional export of the
mid-frame attention heatmaps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import load_frames_dir, save_image
from .evaluate import restore_frame
from .fusion import export_attention_maps

HEATMAP_SUM_TOL = 1e-6


def restore_directory(model, frames_dir, out_dir, stack=False, dump_attention=False):
    """Restore every frame (boundary windows clamp to the edge frame) and
    write them as PNGs; optionally write the three per-source-frame
    attention heatmaps alongside. Returns the list of written frame paths."""
    frames, files = load_frames_dir(frames_dir)
    need = 5 if stack else 3
    if len(frames) < need:
        raise ValueError(f"need at least {need} frames, found {len(frames)}")
    out_dir = Path(out_dir)
    written = []
    for i in range(len(frames)):
        if dump_attention:
            restored, attn = restore_frame(model, frames, i, stack=stack,
                                           return_attention=True)
            h, w = restored.shape[1] // 4, restored.shape[2] // 4
            maps = export_attention_maps(attn, h, w)
            sums = maps.sum(axis=0)
            err = np.abs(sums - 1.0).max()
            if err > HEATMAP_SUM_TOL:
                raise ValueError(f"heatmap pixel sums deviate from 1 by {err:.3g}")
            for t in range(maps.shape[0]):
                save_image(out_dir / "attn" / f"{i:05d}_t{t}.png", maps[t])
        else:
            restored = restore_frame(model, frames, i, stack=stack)
        path = out_dir / f"{i:05d}.png"
        save_image(path, restored)
        written.append(path)
    return written
