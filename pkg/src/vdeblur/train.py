"""Training loop: window sampling, loss assembly, optimization, logging,
checkpointing. Deterministic given (config, seed): rerunning a config
reproduces the loss log bitwise."""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import config_lines
from .data import FrameWindow, augment, load_dataset
from .losses import mse_loss, total_loss, warp_loss
from .network import CascadedDeblurNet, DeblurNet
from .optim import Adam
from .tensor import Tensor
from .warp import resize_bilinear

FLOW_SCALE = 4  # flows live at 1/4 image resolution


def sample_window(seq, center, half):
    idx = range(center - half, center + half + 1)
    return FrameWindow([seq.blurry[i] for i in idx], [seq.sharp[i] for i in idx])


def draw_window(sequences, rng, half, crop):
    seq = sequences[int(rng.integers(len(sequences)))]
    n = len(seq.blurry)
    if n < 2 * half + 1:
        raise ValueError(f"sequence {seq.name} too short for window of {2 * half + 1}")
    center = int(rng.integers(half, n - half))
    return augment(sample_window(seq, center, half), crop, rng)


def _downsampled_sharp(window, lo, hi):
    return [resize_bilinear(Tensor(window.sharp[i]), 1.0 / FLOW_SCALE)
            for i in range(lo, hi)]


def window_losses(model, window, cfg):
    """(mse, warp) loss tensors for one window; warp is None when disabled."""
    frames = [Tensor(f) for f in window.blurry]
    want_warp = cfg.gamma > 0 and cfg.use_flow
    if cfg.stack:
        final, intermediates, flow_sets = model.forward(frames)
        mse = mse_loss(final, Tensor(window.sharp[2]))
        for k, r in enumerate(intermediates):
            mse = mse + mse_loss(r, Tensor(window.sharp[k + 1]))
        mse = mse / (len(intermediates) + 1)
        warp = None
        if want_warp:
            for k, flows in enumerate(flow_sets):
                lo = k if k < 3 else 1  # stage-2 window is the center triplet
                term = warp_loss(_downsampled_sharp(window, lo, lo + 3), flows)
                warp = term if warp is None else warp + term
            warp = warp / len(flow_sets)
    else:
        restored, flows = model.forward(frames)
        mse = mse_loss(restored, Tensor(window.sharp[window.mid]))
        warp = warp_loss(_downsampled_sharp(window, 0, 3), flows) if want_warp else None
    return mse, warp


def build_model(cfg, seed=None):
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    net_cfg = cfg.network_config()
    if cfg.stack:
        return CascadedDeblurNet(net_cfg, rng, share_weights=cfg.stack_share_weights)
    return DeblurNet(net_cfg, rng)


def train(cfg, log_print=False):
    """Run the configured training; returns a dict with the final checkpoint
    path, the log path and the last step's loss values."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(config_lines(cfg))

    sequences = load_dataset(cfg.dataset, cfg.split)
    model = build_model(cfg)
    optimizer = Adam(model.params(), lr=cfg.lr, beta1=cfg.beta1,
                     beta2=cfg.beta2, eps=cfg.eps)
    sampler = np.random.default_rng(cfg.seed + 1)
    half = 2 if cfg.stack else 1

    log_path = out_dir / "train_log.txt"
    started = time.perf_counter()
    result = {}
    with open(log_path, "w") as log:
        for step in range(1, cfg.iters + 1):
            batch_total = None
            mse_sum = 0.0
            warp_sum = 0.0
            for _ in range(cfg.batch):
                window = draw_window(sequences, sampler, half, cfg.crop)
                mse, warp = window_losses(model, window, cfg)
                total = total_loss(mse, warp, cfg.gamma) if warp is not None else mse
                mse_sum += mse.item()
                warp_sum += warp.item() if warp is not None else 0.0
                batch_total = total if batch_total is None else batch_total + total
            batch_total = batch_total / cfg.batch
            loss_val = batch_total.item()
            if not math.isfinite(loss_val):
                raise FloatingPointError(f"non-finite loss at step {step}: {loss_val}")

            optimizer.zero_grad()
            batch_total.backward()
            optimizer.step()

            line = (f"step={step} mse={mse_sum / cfg.batch!r} "
                    f"warp={warp_sum / cfg.batch!r} total={loss_val!r}")
            log.write(line + "\n")
            if log_print and (step % 50 == 0 or step == 1):
                elapsed = time.perf_counter() - started
                print(f"{line} [{elapsed:.1f}s]", flush=True)

            if step % cfg.checkpoint_every == 0 and step < cfg.iters:
                save_checkpoint(out_dir / f"step_{step:06d}.npz", model,
                                extra={"step": step, "run": cfg.to_dict()})
            result = {"mse": mse_sum / cfg.batch, "warp": warp_sum / cfg.batch,
                      "total": loss_val}

    final_path = save_checkpoint(out_dir / "final.npz", model,
                                 extra={"step": cfg.iters, "run": cfg.to_dict()})
    result.update({"checkpoint": str(final_path), "log": str(log_path),
                   "seconds": time.perf_counter() - started})
    return result
