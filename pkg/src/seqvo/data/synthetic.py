"""Synthetic textured-plane scenes with analytic depth and camera motion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics
from ..kvconfig import from_kv, read_kv
from .sample import SequenceSample


@dataclass(frozen=True)
class SynthConfig:
    width: int = 128
    height: int = 96
    fx: float = 100.0
    fy: float = 100.0
    cx: float = 63.5
    cy: float = 47.5
    depth: float = 5.0  # plane distance from the first camera
    # camera motion per frame: pose of frame k+1 in frame k (tx, ty, tz, rx, ry, rz)
    motion: tuple[float, ...] = (0.1, 0.0, 0.0, 0.0, 0.0, 0.0)
    frames: int = 20
    seed: int = 0
    n_waves: int = 8
    min_wavelength_px: float = 20.0
    max_wavelength_px: float = 60.0
    # textured patch half-size, in multiples of the first view's half-extent
    extent: float = 3.0

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy, self.width, self.height)


def load_synth_config(path) -> SynthConfig:
    return from_kv(SynthConfig, read_kv(path))


def _euler(rx, ry, rz):
    cx_, sx = np.cos(rx), np.sin(rx)
    cy_, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx_, -sx], [0, sx, cx_]])
    Ry = np.array([[cy_, 0, sy], [0, 1, 0], [-sy, 0, cy_]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def motion_matrix(motion) -> np.ndarray:
    m = np.asarray(motion, dtype=np.float64)
    if m.shape != (6,):
        raise ValueError(f"motion needs 6 values, got {m.shape}")
    T = np.eye(4)
    T[:3, :3] = _euler(*m[3:])
    T[:3, 3] = m[:3]
    return T


class _Texture:
    """Sum of random plane waves tapered to a constant outside a square patch."""

    def __init__(self, cfg: SynthConfig, rng):
        px = cfg.depth / cfg.fx  # world units per pixel at the plane
        self.half = cfg.extent * max(cfg.width, cfg.height) / 2.0 * px
        self.margin = 0.2 * self.half
        lam = rng.uniform(cfg.min_wavelength_px, cfg.max_wavelength_px, cfg.n_waves) * px
        theta = rng.uniform(0, np.pi, cfg.n_waves)
        self.k = np.stack([np.cos(theta), np.sin(theta)], 1) * (2 * np.pi / lam)[:, None]
        self.phase = rng.uniform(0, 2 * np.pi, cfg.n_waves)
        self.amp = np.full(cfg.n_waves, 0.4 / cfg.n_waves)

    def window(self, X, Y):
        def ramp(a):
            t = np.clip((self.half - np.abs(a)) / self.margin, 0.0, 1.0)
            return t * t * (3 - 2 * t)

        return ramp(X) * ramp(Y)

    def __call__(self, X, Y):
        val = np.zeros_like(X)
        for (kx, ky), ph, a in zip(self.k, self.phase, self.amp):
            val += a * np.sin(kx * X + ky * Y + ph)
        return 0.5 + self.window(X, Y) * val


def render_frame(cfg: SynthConfig, texture, cam_to_world):
    """Render one view of the plane ``Z = cfg.depth``; returns (rgb (H, W, 3), depth (H, W))."""
    H, W = cfg.height, cfg.width
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    rays = np.stack([(u - cfg.cx) / cfg.fx, (v - cfg.cy) / cfg.fy, np.ones_like(u)], -1)
    R = cam_to_world[:3, :3]
    c = cam_to_world[:3, 3]
    d = rays @ R.T
    if np.any(d[..., 2] <= 1e-9):
        raise ValueError("camera motion turns the view away from the plane")
    lam = (cfg.depth - c[2]) / d[..., 2]
    if np.any(lam <= 0):
        raise ValueError("camera motion crosses the textured plane")
    X = c[0] + lam * d[..., 0]
    Y = c[1] + lam * d[..., 1]
    if not np.any(texture.window(X, Y) > 0):
        raise ValueError("camera motion moves the textured patch fully out of view")
    g = texture(X, Y)
    # slightly different gains per channel keep colour informative but consistent
    rgb = np.stack([g, 0.9 * g + 0.05, 0.8 * g + 0.1], -1)
    return rgb.astype(np.float32), lam.astype(np.float32)


def synth_scene(cfg: SynthConfig = SynthConfig(), seq_id="synth") -> SequenceSample:
    """Render ``cfg.frames`` views of a textured fronto-parallel plane under constant motion."""
    if cfg.frames < 2:
        raise ValueError("need at least two frames")
    rng = np.random.default_rng(cfg.seed)
    texture = _Texture(cfg, rng)
    M = motion_matrix(cfg.motion)
    poses = [np.eye(4)]
    for _ in range(cfg.frames - 1):
        poses.append(poses[-1] @ M)
    frames, depths = [], []
    for T in poses:
        rgb, z = render_frame(cfg, texture, T)
        frames.append(rgb)
        depths.append(z)
    return SequenceSample(
        frames=np.stack(frames),
        intrinsics=cfg.intrinsics,
        gt_depth=np.stack(depths),
        gt_poses=np.stack(poses),
        seq_id=seq_id,
        start=0,
    )
