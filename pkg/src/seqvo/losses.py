"""Training objectives and their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import torch
import torch.nn.functional as F

from .errors import ConfigError, ShapeError
from .geometry import pose_vec_to_transform, transform_to_pose_vec

SSIM_WINDOW = 10
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
TRAJECTORY_INTERVALS = (2, 4, 8)


@dataclass(frozen=True)
class LossWeights:
    appearance: float = 0.75
    smoothness: float = 0.1
    trajectory: float = 0.14
    gan: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"loss weight '{f.name}' must be nonnegative")


@dataclass
class LossReport:
    """Scalar value of every term for one step; ``tensor`` is the differentiable total."""

    pho: float = 0.0
    ssim: float = 0.0
    reg: float = 0.0
    ap: float = 0.0
    smo: float = 0.0
    tc: float = 0.0
    gan_g: float = 0.0
    gan_d: float = 0.0
    total: float = 0.0
    weights: LossWeights = field(default_factory=LossWeights)
    tensor: torch.Tensor | None = field(default=None, repr=False, compare=False)

    CSV_COLUMNS = ("step", "pho", "ssim", "reg", "smo", "tc", "gan_g", "gan_d", "total")

    def csv_row(self, step):
        return [step] + [getattr(self, c) for c in self.CSV_COLUMNS[1:]]

    def terms(self):
        return {c: getattr(self, c) for c in ("pho", "ssim", "reg", "smo", "tc", "gan_g", "gan_d")}


def _same_shape(*tensors):
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t is not None and t.shape[-2:] != ref[-2:]:
            raise ShapeError(f"spatial dims differ: {tuple(ref)} vs {tuple(t.shape)}")


def photometric_loss(warped, target, mask=None, valid=None):
    """Mean over pixels of ``mask * valid * |warped - target|`` (channels averaged first)."""
    _same_shape(warped, target, mask, valid)
    if warped.shape != target.shape:
        raise ShapeError(f"warped {tuple(warped.shape)} vs target {tuple(target.shape)}")
    diff = (warped - target).abs().mean(1, keepdim=True)
    if mask is not None:
        diff = diff * mask
    if valid is not None:
        diff = diff * valid
    return diff.mean()


def ssim_map(x, y, window=SSIM_WINDOW):
    if min(x.shape[-2:]) < window:
        raise ValueError(f"image {tuple(x.shape[-2:])} is smaller than the {window}x{window} SSIM window")
    mu_x = F.avg_pool2d(x, window, 1)
    mu_y = F.avg_pool2d(y, window, 1)
    sigma_x = F.avg_pool2d(x * x, window, 1) - mu_x**2
    sigma_y = F.avg_pool2d(y * y, window, 1) - mu_y**2
    sigma_xy = F.avg_pool2d(x * y, window, 1) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return num / den


def ssim_loss(warped, target, window=SSIM_WINDOW):
    """Mean of ``(1 - SSIM) / 2`` over all valid ``window`` x ``window`` windows."""
    if warped.shape != target.shape:
        raise ShapeError(f"warped {tuple(warped.shape)} vs target {tuple(target.shape)}")
    return ((1.0 - ssim_map(warped, target, window)) / 2.0).clamp(0.0, 1.0).mean()


def bce_to_ones(mask):
    return -torch.log(mask.clamp(min=1e-7)).mean()


def mask_regularization(masks):
    """Cross-entropy of each explainability mask against all-ones, summed over scales."""
    if isinstance(masks, torch.Tensor):
        masks = [masks]
    return sum(bce_to_ones(m) for m in masks)


def appearance_loss(pho, ssim, reg, alpha=0.85, n=1):
    """``reg + (1 - alpha) * pho + ssim / n`` with ``n`` the minibatch size."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if n < 1:
        raise ValueError(f"minibatch size must be >= 1, got {n}")
    return reg + (1.0 - alpha) * pho + ssim / n


def _forward_diff(x, dim):
    # zero difference past the last row / column keeps the output at input size
    pad = (0, 1, 0, 0) if dim == -1 else (0, 0, 0, 1)
    return F.pad(torch.diff(x, dim=dim), pad)


def smoothness_loss(disp, img):
    """Edge-aware first-order smoothness of ``disp`` (B, 1, H, W) guided by ``img`` (B, C, H, W)."""
    if disp.shape[-2:] != img.shape[-2:]:
        raise ShapeError(f"disparity {tuple(disp.shape)} and image {tuple(img.shape)} differ")
    dx_d = _forward_diff(disp, -1).abs()
    dy_d = _forward_diff(disp, -2).abs()
    dx_i = _forward_diff(img, -1).abs().mean(1, keepdim=True)
    dy_i = _forward_diff(img, -2).abs().mean(1, keepdim=True)
    return (dx_d * torch.exp(-dx_i) + dy_d * torch.exp(-dy_i)).mean()


def downsample(img, level):
    """Area-average ``img`` by ``2**level``."""
    return img if level == 0 else F.avg_pool2d(img, 2**level)


def multiscale_smoothness(disps, img):
    return sum(smoothness_loss(d, downsample(img, s)) for s, d in enumerate(disps)) / len(disps)


def compose_relative(relative, start, length):
    """Compose ``length`` single-step target->source poses beginning at frame ``start``.

    ``relative`` is (..., L-1, 6) where entry ``k`` maps frame-``k`` points into
    frame ``k+1``.  Returns the (..., 6) pose mapping frame ``start`` into frame
    ``start + length``.
    """
    T = pose_vec_to_transform(relative[..., start, :])
    for k in range(start + 1, start + length):
        T = pose_vec_to_transform(relative[..., k, :]) @ T
    return transform_to_pose_vec(T)


def trajectory_anchors(n_frames, intervals=TRAJECTORY_INTERVALS):
    """Anchor frames for which every interval fits inside an ``n_frames`` window."""
    if n_frames < max(intervals) + 1:
        raise ValueError(
            f"trajectory loss needs at least {max(intervals) + 1} frames, got {n_frames}"
        )
    return list(range(n_frames - max(intervals)))


def trajectory_loss(direct, relative, intervals=TRAJECTORY_INTERVALS):
    """L1 gap between direct multi-frame poses and composed single-step poses.

    ``direct`` is (..., A, len(intervals), 6) for anchors ``0..A-1``;
    ``relative`` is (..., L-1, 6).  Mean over anchors, intervals and batch.
    """
    n_frames = relative.shape[-2] + 1
    anchors = trajectory_anchors(n_frames, intervals)
    if direct.shape[-3:] != (len(anchors), len(intervals), 6):
        raise ShapeError(
            f"direct poses must be (..., {len(anchors)}, {len(intervals)}, 6), got {tuple(direct.shape)}"
        )
    terms = []
    for a in anchors:
        for j, t in enumerate(intervals):
            composed = compose_relative(relative, a, t)
            terms.append((direct[..., a, j, :] - composed).abs().sum(-1))
    return torch.stack(terms, -1).mean()


GAN_VARIANTS = ("none", "wgan", "patchgan")


def gan_losses(variant, real_scores, fake_scores):
    """Generator and discriminator losses; ``real_scores`` may be None for a generator-only call."""
    if variant == "wgan":
        gen = -fake_scores.mean()
        disc = None if real_scores is None else fake_scores.mean() - real_scores.mean()
    elif variant == "patchgan":
        gen = F.mse_loss(fake_scores, torch.ones_like(fake_scores))
        disc = None
        if real_scores is not None:
            disc = 0.5 * (
                F.mse_loss(real_scores, torch.ones_like(real_scores))
                + F.mse_loss(fake_scores, torch.zeros_like(fake_scores))
            )
    else:
        raise ConfigError(f"unknown GAN variant '{variant}'")
    return gen, disc


def _as_float(x):
    return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)


def total_loss(ap, smo=0.0, tc=0.0, gan=0.0, weights=LossWeights(), *, pho=0.0, ssim=0.0, reg=0.0,
               gan_d=0.0) -> LossReport:
    """Weighted sum ``w_a*ap + w_s*smo + w_t*tc + w_g*gan`` with every term recorded."""
    total = weights.appearance * ap + weights.smoothness * smo + weights.trajectory * tc + weights.gan * gan
    return LossReport(
        pho=_as_float(pho), ssim=_as_float(ssim), reg=_as_float(reg), ap=_as_float(ap),
        smo=_as_float(smo), tc=_as_float(tc), gan_g=_as_float(gan), gan_d=_as_float(gan_d),
        total=_as_float(total), weights=weights,
        tensor=total if isinstance(total, torch.Tensor) else torch.tensor(total),
    )
