"""Run configuration: a flat key = value text format with a closed key set.

Unknown keys are hard errors so a typo in an ablation sweep cannot silently
fall back to a default. Lines starting with '#' and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .network import NetworkConfig


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass
class RunConfig:
    # network
    channels: int = 16
    heads: int = 4
    points: int = 12
    frames: int = 3
    res_blocks: int = 3
    leaky_slope: float = 0.1
    use_flow: bool = True
    # loss
    gamma: float = 0.05
    # optimizer
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # schedule
    batch: int = 2
    crop: int = 64
    iters: int = 2000
    seed: int = 7
    checkpoint_every: int = 500
    # cascade
    stack: bool = False
    stack_share_weights: bool = True
    # paths
    dataset: str = ""
    split: str = "train"
    out_dir: str = "runs/default"

    def __post_init__(self):
        for name in ("channels", "heads", "points", "batch", "crop", "iters",
                     "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.crop % 4:
            raise ValueError("crop must be divisible by 4")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def network_config(self):
        return NetworkConfig(channels=self.channels, heads=self.heads,
                             points=self.points, frames=self.frames,
                             res_blocks=self.res_blocks,
                             leaky_slope=self.leaky_slope,
                             use_flow=self.use_flow)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(RunConfig)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_text(text):
    """Parse key = value lines into a RunConfig; unknown keys raise."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate config key {key!r}")
        ftype = _FIELD_TYPES[key]
        if ftype in ("bool", bool):
            values[key] = _parse_bool(val)
        elif ftype in ("int", int):
            values[key] = int(val)
        elif ftype in ("float", float):
            values[key] = float(val)
        else:
            values[key] = val
    return RunConfig(**values)


def load_config(path):
    return parse_config_text(Path(path).read_text())


def config_lines(cfg):
    """Render a RunConfig back to its file format (for run provenance)."""
    return "\n".join(f"{k} = {v}" for k, v in cfg.to_dict().items()) + "\n"
