"""Disparity network conditioned on the sequence code, and the pose / explainability network."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeError
from .blocks import check_channels, conv3x3, crop_like, down_block, strided_conv, upconv, xavier_init

DISP_CHANNELS = (16, 32, 64, 128, 128, 128, 128)
DISP_KERNELS = (7, 5, 3, 3, 3, 3, 3)
DISP_UPCONV = (128, 128, 128, 128, 64, 32, 16)  # for levels 7 .. 1

POSE_CHANNELS = (16, 32, 64, 128, 256, 256, 256)
POSE_KERNELS = (7, 5, 3, 3, 3, 3, 3)
MASK_UPCONV = (256, 128, 64, 32, 16)  # upconv5 .. upconv1


def _normalize(img):
    return (img - 0.5) / 0.5


class DispNet(nn.Module):
    """Encoder-decoder with skip connections predicting disparity at 4 scales.

    The sequence code is added (broadcast over space) to the 7th encoder output.
    Disparities are ``alpha * sigmoid(x) + beta``.
    """

    def __init__(self, code_dim=128, alpha=10.0, beta=0.01,
                 channels=DISP_CHANNELS, kernels=DISP_KERNELS, upconv_planes=DISP_UPCONV):
        super().__init__()
        self.alpha = alpha
        self.beta = beta
        self.code_dim = code_dim
        enc = []
        in_planes = 3
        for out_planes, k in zip(channels, kernels):
            enc.append(down_block(in_planes, out_planes, k))
            in_planes = out_planes
        self.encoder = nn.ModuleList(enc)
        self.bottleneck_channels = channels[-1]

        u = dict(zip(range(7, 0, -1), upconv_planes))
        c = dict(zip(range(1, 8), channels))
        self.upconv = nn.ModuleDict()
        self.iconv = nn.ModuleDict()
        prev = channels[-1]
        for lvl in range(7, 0, -1):
            self.upconv[str(lvl)] = upconv(prev, u[lvl])
            skip = c[lvl - 1] if lvl > 1 else 0
            extra = 1 if lvl <= 3 else 0  # upsampled coarser disparity
            self.iconv[str(lvl)] = conv3x3(u[lvl] + skip + extra, u[lvl])
            prev = u[lvl]
        self.predict = nn.ModuleDict({str(l): nn.Conv2d(u[l], 1, 3, padding=1) for l in (4, 3, 2, 1)})
        xavier_init(self)

    def forward(self, img, code):
        """Returns disparities at scales 1, 1/2, 1/4, 1/8 (finest first)."""
        check_channels(img, 3, "DispNet")
        H, W = img.shape[-2:]
        if H % 8 or W % 8:
            raise ShapeError(f"input {H}x{W} must be divisible by 8")
        if code.dim() != 2 or code.shape[1] != self.bottleneck_channels or code.shape[0] != img.shape[0]:
            raise ShapeError(
                f"code of shape {tuple(code.shape)} does not match bottleneck "
                f"({img.shape[0]}, {self.bottleneck_channels})"
            )
        feats = []
        x = _normalize(img)
        for block in self.encoder:
            x = block(x)
            feats.append(x)
        x = x + code[:, :, None, None]

        disps = {}
        for lvl in range(7, 0, -1):
            ref = feats[lvl - 2] if lvl > 1 else img
            x = crop_like(self.upconv[str(lvl)](x), ref)
            parts = [x]
            if lvl > 1:
                parts.append(ref)
            if lvl <= 3:
                parts.append(F.interpolate(disps[lvl + 1], size=x.shape[-2:], mode="bilinear", align_corners=False))
            x = self.iconv[str(lvl)](torch.cat(parts, 1))
            if lvl <= 4:
                disps[lvl] = self.alpha * torch.sigmoid(self.predict[str(lvl)](x)) + self.beta
        return [disps[1], disps[2], disps[3], disps[4]]


class PoseExpNet(nn.Module):
    """Pose regression from a target and its source frames, plus explainability masks.

    Poses are target -> source, one 6-vector per source, scaled by ``pose_scale``.
    The mask decoder shares the encoder and emits one sigmoid channel per
    source at 4 scales.
    """

    def __init__(self, n_sources=2, pose_scale=0.01, channels=POSE_CHANNELS, kernels=POSE_KERNELS,
                 upconv_planes=MASK_UPCONV, output_exp=True):
        super().__init__()
        self.n_sources = n_sources
        self.pose_scale = pose_scale
        self.output_exp = output_exp
        convs = []
        in_planes = 3 * (1 + n_sources)
        for out_planes, k in zip(channels, kernels):
            convs.append(strided_conv(in_planes, out_planes, k))
            in_planes = out_planes
        self.convs = nn.ModuleList(convs)
        self.pose_pred = nn.Conv2d(channels[-1], 6 * n_sources, 1)

        if output_exp:
            ups = []
            prev = channels[4]
            for planes in upconv_planes:
                ups.append(upconv(prev, planes))
                prev = planes
            self.upconvs = nn.ModuleList(ups)
            self.mask_pred = nn.ModuleList(
                [nn.Conv2d(p, n_sources, 3, padding=1) for p in upconv_planes[1:]]
            )
        xavier_init(self)

    def zero_pose_head(self):
        nn.init.zeros_(self.pose_pred.weight)
        nn.init.zeros_(self.pose_pred.bias)

    def forward(self, target, sources):
        """``sources`` is a list of (B, 3, H, W) images or a (B, S, 3, H, W) tensor.

        Returns ``(poses (B, S, 6), masks)`` where masks is a list of 4 tensors
        (B, S, h, w) at scales 1, 1/2, 1/4, 1/8, or ``None`` when disabled.
        """
        if isinstance(sources, torch.Tensor):
            sources = list(sources.unbind(1))
        if len(sources) == 0:
            raise ValueError("at least one source frame is required")
        if len(sources) != self.n_sources:
            raise ShapeError(f"network built for {self.n_sources} sources, got {len(sources)}")
        check_channels(target, 3, "PoseExpNet target")
        for s in sources:
            if s.shape != target.shape:
                raise ShapeError(f"source {tuple(s.shape)} does not match target {tuple(target.shape)}")
        H, W = target.shape[-2:]
        if H % 8 or W % 8:
            raise ShapeError(f"input {H}x{W} must be divisible by 8")
        x = _normalize(torch.cat([target, *sources], 1))
        feats = []
        for conv in self.convs:
            x = conv(x)
            feats.append(x)
        pose = self.pose_pred(x).mean((2, 3))
        pose = self.pose_scale * pose.view(-1, self.n_sources, 6)

        if not self.output_exp:
            return pose, None
        # upconv5 -> conv4 size, ..., upconv1 -> input size
        refs = [feats[3], feats[2], feats[1], feats[0], target]
        y = feats[4]
        outs = []
        for up, ref in zip(self.upconvs, refs):
            y = crop_like(up(y), ref)
            outs.append(y)
        masks = [torch.sigmoid(head(o)) for head, o in zip(self.mask_pred, outs[1:])]
        return pose, masks[::-1]
