"""JSON checkpoints: config plus flat row-major parameter arrays."""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from glntsp.gln.model import PARAM_NAMES, GlnConfig, GlnParams, LayerParams, ModelError

FORMAT_VERSION = 1


def to_dict(params: GlnParams) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": asdict(params.config),
        "layers": [{name: arr.ravel().tolist() for name, arr in layer.items()} for layer in params.layers],
    }


def from_dict(data: dict) -> GlnParams:
    if data.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported checkpoint format {data.get('format_version')!r}")
    cfg = GlnConfig(**data["config"])
    if len(data["layers"]) != cfg.L:
        raise ModelError(f"checkpoint has {len(data['layers'])} layers, config says {cfg.L}")
    layers = []
    for l, raw in enumerate(data["layers"]):
        shapes = cfg.layer_shapes(l)
        mats = {}
        for name in PARAM_NAMES:
            flat = np.asarray(raw[name], dtype=np.float64)
            if flat.size != int(np.prod(shapes[name])):
                raise ModelError(f"layer {l} {name}: {flat.size} values, expected shape {shapes[name]}")
            mats[name] = flat.reshape(shapes[name])
        layers.append(LayerParams(**mats))
    return GlnParams(cfg, layers)


def save_checkpoint(params: GlnParams, path: str | os.PathLike) -> None:
    """Write-then-rename so a reader never sees a partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(to_dict(params)) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> GlnParams:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
