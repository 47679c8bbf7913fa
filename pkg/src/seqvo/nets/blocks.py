import torch
import torch.nn as nn

from ..errors import ShapeError


def xavier_init(module: nn.Module):
    """Xavier-uniform weights and zero biases on every conv / linear layer."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.xavier_uniform_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def down_block(in_planes, out_planes, kernel_size):
    """Two convolutions, the first with stride 2, each followed by batch norm and ReLU."""
    pad = (kernel_size - 1) // 2
    return nn.Sequential(
        nn.Conv2d(in_planes, out_planes, kernel_size, stride=2, padding=pad),
        nn.BatchNorm2d(out_planes),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_planes, out_planes, kernel_size, stride=1, padding=pad),
        nn.BatchNorm2d(out_planes),
        nn.ReLU(inplace=True),
    )


def strided_conv(in_planes, out_planes, kernel_size):
    pad = (kernel_size - 1) // 2
    return nn.Sequential(
        nn.Conv2d(in_planes, out_planes, kernel_size, stride=2, padding=pad),
        nn.ReLU(inplace=True),
    )


def upconv(in_planes, out_planes):
    return nn.Sequential(
        nn.ConvTranspose2d(in_planes, out_planes, 3, stride=2, padding=1, output_padding=1),
        nn.ReLU(inplace=True),
    )


def conv3x3(in_planes, out_planes):
    return nn.Sequential(nn.Conv2d(in_planes, out_planes, 3, padding=1), nn.ReLU(inplace=True))


def crop_like(x, ref):
    if x.shape[2] < ref.shape[2] or x.shape[3] < ref.shape[3]:
        raise ShapeError(f"cannot crop {tuple(x.shape)} to {tuple(ref.shape)}")
    return x[:, :, : ref.shape[2], : ref.shape[3]]


def check_channels(x: torch.Tensor, channels: int, what: str):
    if x.dim() != 4 or x.shape[1] != channels:
        raise ShapeError(f"{what} expects (B, {channels}, H, W), got {tuple(x.shape)}")
