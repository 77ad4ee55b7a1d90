"""Evaluation metrics for images in [0, 1] (plain numpy, no gradients)."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for unit dynamic range; identical
    images return +inf."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("psnr: shape mismatch")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return float(-10.0 * np.log10(mse))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g2 = np.outer(g1, g1)
    return g2 / g2.sum()


def _channel_ssim(x, y, window, c1, c2):
    wx = sliding_window_view(x, window.shape)
    wy = sliding_window_view(y, window.shape)
    w = window.ravel()
    fx = wx.reshape(-1, w.size)
    fy = wy.reshape(-1, w.size)
    mu_x = fx @ w
    mu_y = fy @ w
    xx = (fx * fx) @ w - mu_x ** 2
    yy = (fy * fy) @ w - mu_y ** 2
    xy = (fx * fy) @ w - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return (num / den).mean()


def ssim(a, b):
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, dynamic range 1.0; averaged over fully-contained windows and
    channels. Accepts [H,W] or [C,H,W]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("ssim: shape mismatch")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if min(a.shape[1], a.shape[2]) < SSIM_WINDOW:
        raise ValueError(f"ssim: image dims must be >= {SSIM_WINDOW}")
    window = gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    vals = [_channel_ssim(a[c], b[c], window, c1, c2) for c in range(a.shape[0])]
    return float(np.mean(vals))
