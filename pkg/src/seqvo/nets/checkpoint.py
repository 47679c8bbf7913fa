"""Versioned checkpoint container.

A checkpoint is a ``torch.save``'d dict::

    {"format_version": int, "arch": {...}, "params": {block: state_dict},
     "optim": {name: state_dict}, "step": int, "extra": {...}}

``arch`` echoes the architecture config; loading refuses a checkpoint whose
config or parameter shapes disagree with the receiving modules.
"""

from __future__ import annotations

import os
from pathlib import Path

import torch

from ..errors import ConfigError, ParseError, ShapeError

FORMAT_VERSION = 1


def save_checkpoint(path, arch: dict, modules: dict, optimizers: dict | None = None, step: int = 0,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "arch": dict(arch),
        "params": {name: {k: v.detach().cpu().clone() for k, v in m.state_dict().items()}
                   for name, m in modules.items()},
        "optim": {name: o.state_dict() for name, o in (optimizers or {}).items()},
        "step": int(step),
        "extra": dict(extra or {}),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def read_checkpoint(path) -> dict:
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ParseError(f"unreadable checkpoint ({exc})", path=path) from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ParseError("not a checkpoint container", path=path, field="format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format version {payload['format_version']}", path=path, field="format_version"
        )
    return payload


def load_checkpoint(path, arch: dict, modules: dict, optimizers: dict | None = None) -> dict:
    """Load parameters (and optimizer state) into ``modules`` after validating them."""
    payload = read_checkpoint(path)
    saved_arch = payload["arch"]
    if saved_arch != dict(arch):
        diff = sorted(k for k in set(saved_arch) | set(arch) if saved_arch.get(k) != arch.get(k))
        raise ConfigError(f"checkpoint architecture differs from config in: {', '.join(diff)}")
    params = payload["params"]
    missing = set(modules) - set(params)
    if missing:
        raise ShapeError(f"checkpoint lacks parameter blocks: {sorted(missing)}")
    for name, module in modules.items():
        own = module.state_dict()
        blk = params[name]
        if set(own) != set(blk):
            raise ShapeError(f"block '{name}' has different tensors than the model")
        for key, tensor in own.items():
            if tuple(tensor.shape) != tuple(blk[key].shape):
                raise ShapeError(
                    f"block '{name}' tensor '{key}': checkpoint {tuple(blk[key].shape)} "
                    f"vs model {tuple(tensor.shape)}"
                )
        module.load_state_dict(blk)
    for name, opt in (optimizers or {}).items():
        if name in payload["optim"]:
            opt.load_state_dict(payload["optim"][name])
    return payload
