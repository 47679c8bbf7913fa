"""Depth metrics and snippet trajectory error."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np
import torch

from ..errors import EmptyGroundTruthError
from ..geometry import pose_vec_to_transform

DEFAULT_DEPTH_CAP = 80.0


@dataclass(frozen=True)
class DepthMetrics:
    abs_diff: float
    abs_rel: float
    sq_rel: float
    a1: float
    a2: float
    a3: float

    @classmethod
    def columns(cls):
        return tuple(f.name for f in fields(cls))

    def as_tuple(self):
        return astuple(self)


def depth_metrics(pred, gt, cap: float = DEFAULT_DEPTH_CAP, median_scale: bool = True) -> DepthMetrics:
    """Error statistics of ``pred`` against ``gt`` over pixels with ``0 < gt <= cap``.

    With ``median_scale`` the prediction is first multiplied by
    ``median(gt) / median(pred)`` over the evaluated pixels.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    valid = (gt > 0) & (gt <= cap)
    if not valid.any():
        raise EmptyGroundTruthError("no ground-truth pixel in (0, cap]")
    p = pred[valid]
    g = gt[valid]
    if median_scale:
        p = p * (np.median(g) / np.median(p))
    diff = p - g
    thresh = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_diff=float(np.mean(np.abs(diff))),
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        a1=float(np.mean(thresh < 1.25)),
        a2=float(np.mean(thresh < 1.25**2)),
        a3=float(np.mean(thresh < 1.25**3)),
    )


def accumulate_trajectory(rel) -> np.ndarray:
    """Global poses from relative motions: ``T_0 = I``, ``T_{i+1} = T_i @ transform(rel_i)``.

    ``rel`` holds pose vectors (N, 6) or transforms (N, 4, 4), each the pose of
    frame ``i+1`` in frame ``i``.  Returns (N+1, 4, 4).
    """
    rel = np.asarray(rel, dtype=np.float64)
    if rel.shape[0] == 0:
        raise ValueError("need at least one relative pose")
    if rel.shape[1:] == (6,):
        rel = pose_vec_to_transform(torch.from_numpy(rel)).numpy()
    out = [np.eye(4)]
    for T in rel:
        out.append(out[-1] @ T)
    return np.stack(out)


def difference_trajectory(traj) -> np.ndarray:
    """Relative motions ``inv(T_i) @ T_{i+1}`` of a global trajectory."""
    traj = np.asarray(traj, dtype=np.float64)
    return np.stack([np.linalg.inv(a) @ b for a, b in zip(traj[:-1], traj[1:])])


def _reanchor(snippet):
    R0 = snippet[0, :3, :3]
    t0 = snippet[0, :3, 3]
    return (snippet[:, :3, 3] - t0) @ R0  # R0^T (t_k - t0) for each k


def snippet_ate(pred, gt) -> float:
    """Mean translation error of one snippet after origin and scale alignment."""
    tp = _reanchor(np.asarray(pred, dtype=np.float64))
    tg = _reanchor(np.asarray(gt, dtype=np.float64))
    denom = np.sum(tp * tp)
    scale = np.sum(tg * tp) / denom if denom > 0 else 1.0
    return float(np.mean(np.linalg.norm(scale * tp - tg, axis=1)))


def ate(pred, gt, snippet_len: int = 5) -> float:
    """Average snippet ATE over every ``snippet_len``-frame window of two trajectories."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"trajectory lengths differ: {pred.shape[0]} vs {gt.shape[0]}")
    if snippet_len < 2 or pred.shape[0] < snippet_len:
        raise ValueError(f"need at least {max(snippet_len, 2)} frames, got {pred.shape[0]}")
    errs = [snippet_ate(pred[i:i + snippet_len], gt[i:i + snippet_len])
            for i in range(pred.shape[0] - snippet_len + 1)]
    return float(np.mean(errs))
