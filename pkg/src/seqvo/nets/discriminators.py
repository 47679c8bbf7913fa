"""Adversarial critics for synthesized target views."""

import torch
import torch.nn as nn

from ..errors import ShapeError
from .blocks import check_channels, down_block, xavier_init
from .depth_pose import DISP_CHANNELS, DISP_KERNELS, _normalize


class WGANCritic(nn.Module):
    """Unconditional critic built from the disparity encoder; returns one unbounded score per image."""

    def __init__(self, channels=DISP_CHANNELS, kernels=DISP_KERNELS):
        super().__init__()
        layers = []
        in_planes = 3
        for out_planes, k in zip(channels, kernels):
            layers.append(down_block(in_planes, out_planes, k))
            in_planes = out_planes
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.score = nn.Linear(in_planes, 1)
        xavier_init(self)

    def forward(self, img, condition=None):
        check_channels(img, 3, "WGANCritic")
        return self.score(self.pool(self.features(_normalize(img))).flatten(1)).squeeze(1)

    @torch.no_grad()
    def clip_weights(self, c):
        for p in self.parameters():
            p.clamp_(-c, c)


class PatchDiscriminator(nn.Module):
    """Fully-convolutional conditional discriminator with a 70x70 receptive field.

    Scores a (B, 1, h, w) map, one value per overlapping patch, for an image
    concatenated channel-wise with its conditioning image.
    """

    def __init__(self, in_channels=3, base=64):
        super().__init__()

        def block(cin, cout, stride, norm=True):
            layers = [nn.Conv2d(cin, cout, 4, stride=stride, padding=1)]
            if norm:
                layers.append(nn.BatchNorm2d(cout))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            return layers

        self.model = nn.Sequential(
            *block(2 * in_channels, base, 2, norm=False),
            *block(base, base * 2, 2),
            *block(base * 2, base * 4, 2),
            *block(base * 4, base * 8, 1),
            nn.Conv2d(base * 8, 1, 4, stride=1, padding=1),
        )
        self.in_channels = in_channels
        xavier_init(self)

    def forward(self, img, condition):
        if img.shape != condition.shape:
            raise ShapeError(f"image {tuple(img.shape)} and condition {tuple(condition.shape)} differ")
        check_channels(img, self.in_channels, "PatchDiscriminator")
        return self.model(_normalize(torch.cat([img, condition], 1)))


def receptive_field(module: PatchDiscriminator) -> int:
    """Receptive field (pixels) of one output score, from the conv stack geometry."""
    rf = 1
    for m in reversed([m for m in module.model if isinstance(m, nn.Conv2d)]):
        rf = rf * m.stride[0] + (m.kernel_size[0] - m.stride[0])
    return rf
