"""Synthetic blur data, augmentation and image/dataset I/O.

Scenes are textured rigid shapes translating over a textured background;
motion blur is synthesized the way high-frame-rate capture datasets do it,
by averaging a window of virtual subframes centered on each sharp frame's
timestamp. Everything is deterministic given (scene spec, seed).

Dataset layout on disk: <root>/<seq>/blur/%05d.png and
<root>/<seq>/sharp/%05d.png plus a manifest.json listing sequences and
their split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class ShapeSpec:
    kind: str                      # "rect" | "disk"
    size: tuple                    # (w, h) for rect, (radius,) for disk
    start: tuple                   # center (x, y) at t = 0
    velocity: tuple                # apparent image-space velocity, px/frame
    color: tuple = (0.7, 0.7, 0.7)
    texture_amp: float = 0.2


@dataclass
class SceneSpec:
    width: int = 96
    height: int = 96
    frames: int = 20
    subframe_factor: int = 8       # virtual subframes per frame interval
    blur_window: int = 7           # subframes averaged per blurry frame (odd)
    camera_velocity: tuple = (0.0, 0.0)
    texture_cells: int = 12        # noise granularity of generated textures
    background_color: tuple = None  # flat background instead of texture
    shapes: list = field(default_factory=list)

    def __post_init__(self):
        if self.subframe_factor < 1:
            raise ValueError("subframe factor must be >= 1")
        if self.blur_window % 2 == 0 or self.blur_window < 1:
            raise ValueError("blur window must be a positive odd integer")
        for v in [self.camera_velocity] + [s.velocity for s in self.shapes]:
            if not all(np.isfinite(v)):
                raise ValueError("velocities must be finite")


def scene_from_dict(d):
    shapes = [ShapeSpec(kind=s["kind"], size=tuple(s["size"]), start=tuple(s["start"]),
                        velocity=tuple(s["velocity"]), color=tuple(s.get("color", (0.7, 0.7, 0.7))),
                        texture_amp=float(s.get("texture_amp", 0.2)))
              for s in d.get("shapes", [])]
    bg = d.get("background_color")
    return SceneSpec(width=int(d["width"]), height=int(d["height"]), frames=int(d["frames"]),
                     subframe_factor=int(d.get("subframe_factor", 8)),
                     blur_window=int(d.get("blur_window", 7)),
                     camera_velocity=tuple(d.get("camera_velocity", (0.0, 0.0))),
                     texture_cells=int(d.get("texture_cells", 12)),
                     background_color=tuple(bg) if bg is not None else None,
                     shapes=shapes)


# -- rendering -----------------------------------------------------------------

def _make_texture(rng, h, w, cells):
    """Smooth periodic RGB noise tile in [0,1]."""
    ch = max(2, min(cells, h))
    cw = max(2, min(cells, w))
    coarse = rng.uniform(0.0, 1.0, size=(ch, cw, 3))
    ys = (np.arange(h) + 0.5) * ch / h - 0.5
    xs = (np.arange(w) + 0.5) * cw / w - 0.5
    return _sample_periodic(coarse, xs[None, :].repeat(h, 0), ys[:, None].repeat(w, 1))


def _sample_periodic(tile, xs, ys):
    """Bilinear lookup into a periodic tile; xs/ys are float index grids."""
    th, tw = tile.shape[0], tile.shape[1]
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    x0m, x1m = x0 % tw, (x0 + 1) % tw
    y0m, y1m = y0 % th, (y0 + 1) % th
    top = tile[y0m, x0m] * (1 - fx) + tile[y0m, x1m] * fx
    bot = tile[y1m, x0m] * (1 - fx) + tile[y1m, x1m] * fx
    return top * (1 - fy) + bot * fy


def _rect_coverage(h, w, cx, cy, sx, sy):
    """Exact per-pixel coverage of an axis-aligned rectangle (pixel i spans
    [i-0.5, i+0.5])."""
    px = np.arange(w)
    py = np.arange(h)
    cov_x = np.clip(np.minimum(cx + sx / 2, px + 0.5) - np.maximum(cx - sx / 2, px - 0.5), 0.0, 1.0)
    cov_y = np.clip(np.minimum(cy + sy / 2, py + 0.5) - np.maximum(cy - sy / 2, py - 0.5), 0.0, 1.0)
    return cov_y[:, None] * cov_x[None, :]


_SUBGRID = (np.arange(4) - 1.5) / 4.0


def _disk_coverage(h, w, cx, cy, radius):
    """4x4 supersampled coverage of a disk."""
    px = np.arange(w)
    py = np.arange(h)
    dx = px[None, :, None] + _SUBGRID[None, None, :] - cx   # [1,W,4]
    dy = py[:, None, None] + _SUBGRID[None, None, :] - cy   # [H,1,4]
    inside = (dx[:, :, None, :] ** 2 + dy[:, :, :, None] ** 2) <= radius * radius
    return inside.mean(axis=(2, 3))


def render_frames(scene, seed, times):
    """Render the scene at the given (possibly fractional) frame times.

    Returns a list of [3,H,W] float32 images in [0,1]; deterministic in
    (scene, seed)."""
    rng = np.random.default_rng(seed)
    h, w = scene.height, scene.width
    bg_tile = _make_texture(rng, h, w, scene.texture_cells)
    shape_tiles = [_make_texture(rng, 32, 32, max(3, scene.texture_cells // 2))
                   for _ in scene.shapes]
    camx, camy = scene.camera_velocity
    ys = np.arange(h)[:, None].repeat(w, 1).astype(np.float64)
    xs = np.arange(w)[None, :].repeat(h, 0).astype(np.float64)

    frames = []
    for t in times:
        if scene.background_color is not None:
            img = np.broadcast_to(np.asarray(scene.background_color, dtype=np.float64),
                                  (h, w, 3)).copy()
        else:
            img = _sample_periodic(bg_tile, xs + camx * t, ys + camy * t)
        for spec, tile in zip(scene.shapes, shape_tiles):
            cx = spec.start[0] + spec.velocity[0] * t
            cy = spec.start[1] + spec.velocity[1] * t
            if spec.kind == "rect":
                cov = _rect_coverage(h, w, cx, cy, spec.size[0], spec.size[1])
            elif spec.kind == "disk":
                cov = _disk_coverage(h, w, cx, cy, spec.size[0])
            else:
                raise ValueError(f"unknown shape kind {spec.kind!r}")
            tex = _sample_periodic(tile, xs - cx, ys - cy)
            rgb = np.clip(np.asarray(spec.color) + spec.texture_amp * (tex - 0.5), 0.0, 1.0)
            img = img * (1 - cov[..., None]) + rgb * cov[..., None]
        frames.append(np.clip(img, 0.0, 1.0).transpose(2, 0, 1).astype(np.float32))
    return frames


def render_sequence(scene, seed):
    """Sharp frames at integer times 0 .. frames-1."""
    return render_frames(scene, seed, range(scene.frames))


def synthesize_blur(frames, window):
    """Average `window` consecutive frames: result[j] = mean(frames[j:j+window]),
    centered on frames[j + window // 2]. window must be odd and fit."""
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if window > len(frames):
        raise ValueError(f"window {window} exceeds the {len(frames)} available frames")
    if window == 1:
        return list(frames)
    stackf = np.stack(frames).astype(np.float64)
    csum = np.cumsum(stackf, axis=0)
    out = []
    for j in range(len(frames) - window + 1):
        s = csum[j + window - 1] - (csum[j - 1] if j > 0 else 0.0)
        out.append((s / window).astype(np.float32))
    return out


def blur_sequence(scene, seed):
    """(sharp, blurry) frame lists for a scene, blur synthesized from padded
    virtual subframes so every sharp timestamp has a full window."""
    rate = scene.subframe_factor
    pad = scene.blur_window // 2
    n_sub = pad + (scene.frames - 1) * rate + pad + 1
    times = [(j - pad) / rate for j in range(n_sub)]
    dense = render_frames(scene, seed, times)
    blurred = synthesize_blur(dense, scene.blur_window)
    sharp = [dense[pad + k * rate] for k in range(scene.frames)]
    blurry = [blurred[k * rate] for k in range(scene.frames)]
    return sharp, blurry


# -- frame windows and augmentation ---------------------------------------------

@dataclass
class FrameWindow:
    """Consecutive blurry frames with the mid one to restore, plus optional
    ground-truth sharp frames."""

    blurry: list
    sharp: list = None
    mid: int = None

    def __post_init__(self):
        if len(self.blurry) not in (3, 5):
            raise ValueError("window length must be 3 or 5")
        if self.mid is None:
            self.mid = len(self.blurry) // 2
        shapes = {f.shape for f in self.blurry}
        if self.sharp is not None:
            if len(self.sharp) != len(self.blurry):
                raise ValueError("sharp frame count must match blurry")
            shapes |= {f.shape for f in self.sharp}
        if len(shapes) != 1:
            raise ValueError("all frames in a window must share dims")


def transform_frame(frame, crop_xy, crop_size, flip_lr, flip_ud, k_rot):
    x0, y0 = crop_xy
    out = frame[:, y0:y0 + crop_size, x0:x0 + crop_size]
    if flip_lr:
        out = out[:, :, ::-1]
    if flip_ud:
        out = out[:, ::-1, :]
    if k_rot:
        out = np.rot90(out, k=k_rot, axes=(1, 2))
    return np.ascontiguousarray(out)


def apply_window_transform(window, crop_xy, crop_size, flip_lr=False, flip_ud=False, k_rot=0):
    """One identical crop/flip/rotation applied to every frame, blurry and
    sharp alike, so pixel correspondence is preserved."""
    blurry = [transform_frame(f, crop_xy, crop_size, flip_lr, flip_ud, k_rot)
              for f in window.blurry]
    sharp = None
    if window.sharp is not None:
        sharp = [transform_frame(f, crop_xy, crop_size, flip_lr, flip_ud, k_rot)
                 for f in window.sharp]
    return FrameWindow(blurry, sharp, window.mid)


def augment(window, crop_size, rng):
    """Random crop plus random flips and 90-degree rotations."""
    h, w = window.blurry[0].shape[1], window.blurry[0].shape[2]
    if crop_size > min(h, w):
        raise ValueError("crop exceeds frame dims")
    if crop_size % 4:
        raise ValueError("crop size must be divisible by 4")
    x0 = int(rng.integers(0, w - crop_size + 1))
    y0 = int(rng.integers(0, h - crop_size + 1))
    flip_lr, flip_ud = bool(rng.integers(2)), bool(rng.integers(2))
    k_rot = int(rng.integers(4))
    return apply_window_transform(window, (x0, y0), crop_size, flip_lr, flip_ud, k_rot)


# -- image I/O -------------------------------------------------------------------

def save_image(path, arr):
    """Write [3,H,W] (RGB) or [H,W] / [1,H,W] (grayscale) floats in [0,1] as
    an 8-bit PNG."""
    arr = np.asarray(arr)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    q = np.clip(np.rint(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    if q.ndim == 2:
        img = Image.fromarray(q, mode="L")
    elif q.ndim == 3 and q.shape[0] == 3:
        img = Image.fromarray(q.transpose(1, 2, 0), mode="RGB")
    else:
        raise ValueError(f"cannot save array of shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def load_image(path):
    """Read an image file as [3,H,W] float32 in [0,1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_frames_dir(directory):
    """All image files in a directory, ordered lexicographically by name."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    if not files:
        raise FileNotFoundError(f"no image files in {directory}")
    return [load_image(p) for p in files], files


# -- datasets ---------------------------------------------------------------------

@dataclass
class SequenceData:
    name: str
    blurry: list
    sharp: list


def build_dataset(spec, out_root):
    """Render and write every sequence of a synthesis spec.

    spec: dict with "seed", "sequences" (each a scene dict plus "name" and
    optional "split") -- typically parsed from a JSON file. Returns the
    manifest dict that was written.
    """
    out_root = Path(out_root)
    seed = int(spec.get("seed", 0))
    entries = []
    for i, seq in enumerate(spec["sequences"]):
        name = seq["name"]
        scene = scene_from_dict(seq)
        sharp, blurry = blur_sequence(scene, seed + i)
        for k, (s, b) in enumerate(zip(sharp, blurry)):
            save_image(out_root / name / "sharp" / f"{k:05d}.png", s)
            save_image(out_root / name / "blur" / f"{k:05d}.png", b)
        entries.append({"name": name, "frames": len(sharp),
                        "split": seq.get("split", "train")})
    manifest = {"version": 1, "sequences": entries}
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def load_dataset(root, split=None):
    """Load dataset sequences (optionally one split) fully into memory."""
    root = Path(root)
    with open(root / "manifest.json") as fh:
        manifest = json.load(fh)
    sequences = []
    for entry in manifest["sequences"]:
        if split is not None and entry["split"] != split:
            continue
        blurry, _ = load_frames_dir(root / entry["name"] / "blur")
        sharp, _ = load_frames_dir(root / entry["name"] / "sharp")
        if len(blurry) != len(sharp):
            raise ValueError(f"sequence {entry['name']}: blur/sharp frame counts differ")
        sequences.append(SequenceData(entry["name"], blurry, sharp))
    if not sequences:
        raise ValueError(f"no sequences for split {split!r} in {root}")
    return sequences
