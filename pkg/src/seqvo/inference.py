"""Run a trained model over a whole sequence: per-frame depth and a global trajectory."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import SequenceSample, save_poses
from .evaluation import accumulate_trajectory
from .geometry import invert, pose_vec_to_transform
from .kvconfig import from_kv, parse_kv
from .nets import load_checkpoint, read_checkpoint
from .training import SeqVOModel, TrainConfig, collate


@dataclass
class Prediction:
    depth: np.ndarray  # (N, H, W) at network resolution
    rel_poses: np.ndarray  # (N-1, 4, 4), pose of frame i+1 in frame i
    trajectory: np.ndarray  # (N, 4, 4) camera-to-world, frame 0 at identity


def load_model(path) -> tuple[SeqVOModel, TrainConfig]:
    """Generator networks from a training checkpoint, in eval mode."""
    payload = read_checkpoint(path)
    text = payload.get("extra", {}).get("config")
    cfg = from_kv(TrainConfig, parse_kv(text), strict=False) if text else TrainConfig()
    model = SeqVOModel(use_lstm=cfg.use_lstm, disp_alpha=cfg.disp_alpha, disp_beta=cfg.disp_beta,
                       pose_scale=cfg.pose_scale)
    # the discriminator block (if any) is not needed here
    load_checkpoint(path, cfg.arch(), model.groups())
    model.eval()
    return model, cfg


def _window_starts(n, length, stride):
    if n < length:
        raise ValueError(f"sequence has {n} frames, model needs windows of {length}")
    starts = list(range(0, n - length + 1, stride))
    if starts[-1] != n - length:
        starts.append(n - length)
    return starts


@torch.no_grad()
def predict_sequence(model: SeqVOModel, seq: SequenceSample, size, length: int) -> Prediction:
    """Slide ``length``-frame windows over ``seq`` (flows required) and stitch the outputs.

    Each adjacent pair takes its pose from the first window that covers it. A
    frame's depth comes from a window where it is an interior target when possible.
    """
    n = len(seq)
    h, w = size
    depth = np.zeros((n, h, w), np.float32)
    interior = np.zeros(n, bool)
    seen = np.zeros(n, bool)
    rel = [None] * (n - 1)
    for s in _window_starts(n, length, max(1, length - 2)):
        batch = collate([seq.window(s, length)], size)
        out = model(batch)
        steps = model.single_step_poses(out, 1)[0]  # (L-1, 6) target->source, k -> k+1
        for k in range(length - 1):
            if rel[s + k] is None:
                rel[s + k] = invert(pose_vec_to_transform(steps[k].double()), validate=False).numpy()
        codes = model.sequence_codes(batch.flows)[0]  # (L-1, C)
        # frame j pairs with the code of (j-1, j); the first frame borrows (0, 1)
        idx = torch.clamp(torch.arange(length) - 1, min=0)
        disp = model.dispnet(batch.frames[0], codes[idx])[0][:, 0]
        for j in range(length):
            f = s + j
            inner = 0 < j < length - 1
            if not seen[f] or (inner and not interior[f]):
                depth[f] = (1.0 / disp[j]).numpy()
                seen[f] = True
                interior[f] |= inner
    rel = np.stack(rel)
    return Prediction(depth=depth, rel_poses=rel, trajectory=accumulate_trajectory(rel))


def save_prediction(pred: Prediction, out_dir, name="pred") -> dict:
    """``depth/NNNNNN.npy`` per frame and a KITTI-format ``<name>.txt`` trajectory."""
    out = Path(out_dir)
    ddir = out / "depth"
    ddir.mkdir(parents=True, exist_ok=True)
    for i, d in enumerate(pred.depth):
        np.save(ddir / f"{i:06d}.npy", d)
    return {"depth_dir": ddir, "trajectory": save_poses(out / f"{name}.txt", pred.trajectory)}
