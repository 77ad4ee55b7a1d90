"""Versioned model checkpoints.

A checkpoint is an npz container holding one JSON metadata entry plus the
named parameter tensors as float32 arrays. Field order is fixed: "__meta__"
first, then parameters in model traversal order (the order listed in
meta["params"]). Meta echoes the checkpoint format version and the network
configuration the parameters belong to.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .network import NetworkConfig

FORMAT_VERSION = 1


def save_checkpoint(path, model, extra=None):
    """Write a model's parameters; `extra` (a JSON-able dict) is stored in
    the metadata for run provenance."""
    named = list(model.named_params())
    meta = {
        "version": FORMAT_VERSION,
        "network": asdict(model.cfg),
        "params": [name for name, _ in named],
        "extra": extra or {},
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, p in named:
        arrays[f"param/{name}"] = p.data.astype(np.float32)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)
    return path


def load_checkpoint(path):
    """Returns (network_config, {name: float32 array}, meta)."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        params = {name: z[f"param/{name}"] for name in meta["params"]}
    cfg = NetworkConfig(**meta["network"])
    return cfg, params, meta


def restore_model(model, params):
    """Copy checkpoint arrays into a constructed model (shapes must match)."""
    named = dict(model.named_params())
    if set(named) != set(params):
        missing = set(named) ^ set(params)
        raise ValueError(f"checkpoint/model parameter mismatch: {sorted(missing)[:5]} ...")
    for name, arr in params.items():
        p = named[name]
        if p.data.shape != arr.shape:
            raise ValueError(f"shape mismatch for {name}: {p.data.shape} vs {arr.shape}")
        p.data = arr.astype(p.data.dtype)
    return model
