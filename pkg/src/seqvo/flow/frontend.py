"""Dense optical flow between consecutive frames and its preparation for the encoder."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from . import _backend
from .fileio import load_precomputed_flow, write_flow


def to_gray(img: np.ndarray) -> np.ndarray:
    """(H, W, 3) or (3, H, W) RGB in [0, 1] to (H, W) luminance; 2-D input passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[0] == 3 and img.shape[-1] != 3:
        img = np.moveaxis(img, 0, -1)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise ValueError(f"expected a grayscale or RGB image, got shape {img.shape}")
    return img @ np.array([0.299, 0.587, 0.114])


def _upsample_flow(flow, shape):
    """Bilinear 2x upsampling of a flow field to ``shape``, displacements doubled."""
    H, W = shape
    ys = (np.arange(H) + 0.5) / 2.0 - 0.5
    xs = (np.arange(W) + 0.5) / 2.0 - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((H, W, 2))
    for c in range(2):
        out[..., c] = 2.0 * ndimage.map_coordinates(flow[..., c], [gy, gx], order=1, mode="nearest")
    return out


def _pyramid(img, levels, sigma):
    pyr = [ndimage.gaussian_filter(img, sigma, mode="nearest")]
    for _ in range(levels - 1):
        pyr.append(ndimage.gaussian_filter(pyr[-1], 1.0, mode="nearest")[::2, ::2].copy())
    return pyr


def compute_flow(
    frame_a,
    frame_b,
    levels: int = 3,
    radius: int = 4,
    iterations: int = 5,
    reg: float = 1e-4,
    sigma: float = 1.0,
    backend: str | None = None,
) -> np.ndarray:
    """Pyramidal dense Lucas-Kanade flow such that ``a(x, y) ~ b(x + u, y + v)``.

    Frames are single-channel arrays with intensities in [0, 1].  Returns a
    float32 (H, W, 2) array holding ``(u, v)`` in pixels.  ``backend`` selects the
    refinement kernel (``"cython"`` or ``"python"``); default is whichever was
    importable.
    """
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"frames must be single-channel 2-D arrays, got {a.shape} and {b.shape}")
    if a.shape != b.shape:
        raise ValueError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    kernel = _backend.get_kernel(backend)

    # never build a level smaller than the LK window
    levels = max(1, min(levels, int(np.log2(max(2, min(a.shape) // (2 * radius + 1)))) + 1))
    pa = _pyramid(a, levels, sigma)
    pb = _pyramid(b, levels, sigma)
    flow = np.zeros(pa[-1].shape + (2,))
    for lvl in range(levels - 1, -1, -1):
        if flow.shape[:2] != pa[lvl].shape:
            flow = _upsample_flow(flow, pa[lvl].shape)
        flow = np.ascontiguousarray(flow)
        kernel(np.ascontiguousarray(pa[lvl]), np.ascontiguousarray(pb[lvl]), flow, radius, iterations, reg)
    return flow.astype(np.float32)


def resize_flow(flow: np.ndarray, size) -> np.ndarray:
    """Bilinearly resize (H, W, 2) flow to ``size = (h, w)``, rescaling displacements."""
    flow = np.asarray(flow, dtype=np.float32)
    H, W = flow.shape[:2]
    h, w = size
    if (h, w) == (H, W):
        return flow.copy()
    t = torch.from_numpy(np.ascontiguousarray(flow.transpose(2, 0, 1)))[None]
    out = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False)[0]
    out[0] *= w / W
    out[1] *= h / H
    return out.numpy().transpose(1, 2, 0).copy()


def flow_to_encoder_input(flow: np.ndarray, size=None) -> torch.Tensor:
    """Normalize flow by half the image size and resize it to ``size`` (h, w).

    Returns a (2, h, w) float32 tensor; a displacement of half the image width
    maps to 1.
    """
    flow = np.asarray(flow, dtype=np.float32)
    H, W = flow.shape[:2]
    if size is not None:
        flow = resize_flow(flow, size)
    h, w = flow.shape[:2]
    out = np.empty((2, h, w), dtype=np.float32)
    out[0] = flow[..., 0] / np.float32(w / 2.0)
    out[1] = flow[..., 1] / np.float32(h / 2.0)
    return torch.from_numpy(out)


class FlowProvider:
    """Source of flow fields for consecutive frame pairs."""

    def flow(self, key, frame_a, frame_b) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class OnTheFlyFlow(FlowProvider):
    """Compute flow on demand, optionally writing it to a cache directory."""

    def __init__(self, cache_dir=None, **flow_kwargs):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.flow_kwargs = flow_kwargs

    def flow(self, key, frame_a, frame_b):
        if self.cache_dir is not None:
            path = cache_path(self.cache_dir, key)
            if path.exists():
                return load_precomputed_flow(path)
        f = compute_flow(to_gray(frame_a), to_gray(frame_b), **self.flow_kwargs)
        if self.cache_dir is not None:
            write_flow(path, f)
        return f


class PrecomputedFlow(FlowProvider):
    """Read flow written ahead of time; never computes."""

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)

    def flow(self, key, frame_a=None, frame_b=None):
        return load_precomputed_flow(cache_path(self.cache_dir, key))


def cache_path(cache_dir, key) -> Path:
    """``key`` is ``(sequence_id, frame_index)`` for the pair (index, index + 1)."""
    seq, idx = key
    return Path(cache_dir) / str(seq) / f"{int(idx):06d}.vofl"
