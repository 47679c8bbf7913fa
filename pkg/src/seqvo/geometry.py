"""Camera geometry and differentiable view synthesis.

Conventions
-----------
* A pose vector is ``(tx, ty, tz, rx, ry, rz)``: translation followed by Euler
  angles in radians.  The rotation is ``R = Rz @ Ry @ Rx``.
* Rigid transforms are ``(..., 4, 4)`` homogeneous matrices.
* Poses predicted by the pose network map points expressed in the *target*
  camera frame into the *source* camera frame (target -> source).  That is the
  direction inverse warping needs: for each target pixel we look up where it
  lands in the source image.
* Pixel coordinates are pixel centres: column ``u`` in ``[0, W-1]``, row ``v`` in
  ``[0, H-1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import torch

from .errors import ShapeError

# tolerance (pixels) when deciding whether a projected coordinate is inside the image
_BOUNDS_EPS = 1e-3


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics for an image of ``width`` x ``height`` pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside a {self.width}x{self.height} image"
            )

    def scaled(self, level: int) -> "CameraIntrinsics":
        """Intrinsics for pyramid ``level`` (everything divided by ``2**level``)."""
        if level == 0:
            return self
        f = 2**level
        if self.width % f or self.height % f:
            raise ShapeError(
                f"{self.width}x{self.height} image is not divisible by 2**{level}"
            )
        return CameraIntrinsics(
            self.fx / f, self.fy / f, self.cx / f, self.cy / f, self.width // f, self.height // f
        )

    def resized(self, width: int, height: int) -> "CameraIntrinsics":
        """Intrinsics after resizing the image to ``width`` x ``height``."""
        sx = width / self.width
        sy = height / self.height
        return replace(
            self, fx=self.fx * sx, fy=self.fy * sy, cx=self.cx * sx, cy=self.cy * sy,
            width=width, height=height,
        )

    def matrix(self, dtype=torch.float32, device=None) -> torch.Tensor:
        return torch.tensor(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=dtype, device=device,
        )


def _check_finite(x: torch.Tensor, what: str):
    if not torch.isfinite(x).all():
        raise ValueError(f"{what} contains non-finite values")


def euler_to_rotation(angles: torch.Tensor) -> torch.Tensor:
    """Rotation matrices ``Rz @ Ry @ Rx`` for ``(..., 3)`` angles ``(rx, ry, rz)``."""
    rx, ry, rz = angles.unbind(-1)
    cx, sx = torch.cos(rx), torch.sin(rx)
    cy, sy = torch.cos(ry), torch.sin(ry)
    cz, sz = torch.cos(rz), torch.sin(rz)
    # expanded product of the three elementary rotations
    r00 = cz * cy
    r01 = cz * sy * sx - sz * cx
    r02 = cz * sy * cx + sz * sx
    r10 = sz * cy
    r11 = sz * sy * sx + cz * cx
    r12 = sz * sy * cx - cz * sx
    r20 = -sy
    r21 = cy * sx
    r22 = cy * cx
    rows = [
        torch.stack([r00, r01, r02], -1),
        torch.stack([r10, r11, r12], -1),
        torch.stack([r20, r21, r22], -1),
    ]
    return torch.stack(rows, -2)


def rotation_to_euler(R: torch.Tensor) -> torch.Tensor:
    """Inverse of :func:`euler_to_rotation` for ``|ry| < pi/2``."""
    rx = torch.atan2(R[..., 2, 1], R[..., 2, 2])
    ry = torch.asin((-R[..., 2, 0]).clamp(-1.0, 1.0))
    rz = torch.atan2(R[..., 1, 0], R[..., 0, 0])
    return torch.stack([rx, ry, rz], -1)


def pose_vec_to_transform(pose: torch.Tensor) -> torch.Tensor:
    """Convert ``(..., 6)`` pose vectors into ``(..., 4, 4)`` rigid transforms."""
    pose = torch.as_tensor(pose)
    if pose.shape[-1] != 6:
        raise ShapeError(f"pose vectors need 6 components, got shape {tuple(pose.shape)}")
    _check_finite(pose, "pose")
    R = euler_to_rotation(pose[..., 3:])
    t = pose[..., :3].unsqueeze(-1)
    top = torch.cat([R, t], -1)
    bottom = torch.zeros(*pose.shape[:-1], 1, 4, dtype=pose.dtype, device=pose.device)
    bottom[..., 0, 3] = 1.0
    return torch.cat([top, bottom], -2)


def transform_to_pose_vec(T: torch.Tensor) -> torch.Tensor:
    """Convert ``(..., 4, 4)`` rigid transforms back to ``(..., 6)`` pose vectors."""
    return torch.cat([T[..., :3, 3], rotation_to_euler(T[..., :3, :3])], -1)


def is_rigid(T: torch.Tensor, atol: float = 1e-6) -> bool:
    """True when every transform in ``T`` has an orthonormal, det +1 rotation block."""
    T = torch.as_tensor(T)
    if T.shape[-2:] != (4, 4):
        return False
    R = T[..., :3, :3].double()
    eye = torch.eye(3, dtype=R.dtype)
    bottom = torch.tensor([0.0, 0.0, 0.0, 1.0], dtype=R.dtype)
    return bool(
        torch.allclose(R @ R.transpose(-1, -2), eye.expand_as(R), atol=atol)
        and torch.allclose(torch.linalg.det(R), torch.ones((), dtype=R.dtype), atol=atol)
        and torch.allclose(T[..., 3, :].double(), bottom.expand_as(T[..., 3, :]), atol=atol)
    )


def _check_rigid(T: torch.Tensor, what: str):
    if not is_rigid(T):
        raise ValueError(f"{what} is not a valid rigid transform")


def compose(a: torch.Tensor, b: torch.Tensor, validate: bool = True) -> torch.Tensor:
    """Matrix product ``a @ b`` of two rigid transforms."""
    if validate:
        _check_rigid(a, "left operand")
        _check_rigid(b, "right operand")
    return a @ b


def invert(a: torch.Tensor, validate: bool = True) -> torch.Tensor:
    """Closed-form inverse ``[R^T | -R^T t]`` of a rigid transform."""
    if validate:
        _check_rigid(a, "transform")
    Rt = a[..., :3, :3].transpose(-1, -2)
    t = -(Rt @ a[..., :3, 3:])
    out = torch.zeros_like(a)
    out[..., :3, :3] = Rt
    out[..., :3, 3:] = t
    out[..., 3, 3] = 1.0
    return out


def _intrinsics_tensor(K, batch: int, dtype, device) -> torch.Tensor:
    if isinstance(K, CameraIntrinsics):
        K = K.matrix(dtype=dtype, device=device)
    K = torch.as_tensor(K, dtype=dtype, device=device)
    if K.dim() == 2:
        K = K.unsqueeze(0)
    if K.shape[-2:] != (3, 3):
        raise ShapeError(f"intrinsics must be 3x3, got {tuple(K.shape)}")
    return K.expand(batch, 3, 3)


def project_coords(depth: torch.Tensor, pose_t2s: torch.Tensor, K) -> torch.Tensor:
    """Source-image pixel coordinates of every target pixel.

    ``depth`` is ``(B, 1, H, W)`` (or ``(B, H, W)``) target depth, ``pose_t2s`` is
    ``(B, 6)``.  Returns ``(B, H, W, 2)`` holding ``(u, v)`` in the source image.
    """
    if depth.dim() == 3:
        depth = depth.unsqueeze(1)
    B, _, H, W = depth.shape
    if pose_t2s.shape != (B, 6):
        raise ShapeError(f"expected poses of shape ({B}, 6), got {tuple(pose_t2s.shape)}")
    Km = _intrinsics_tensor(K, B, depth.dtype, depth.device)
    fx, fy = Km[:, 0, 0].view(B, 1, 1), Km[:, 1, 1].view(B, 1, 1)
    cx, cy = Km[:, 0, 2].view(B, 1, 1), Km[:, 1, 2].view(B, 1, 1)

    v, u = torch.meshgrid(
        torch.arange(H, dtype=depth.dtype, device=depth.device),
        torch.arange(W, dtype=depth.dtype, device=depth.device),
        indexing="ij",
    )
    z = depth[:, 0]
    # back-project with K^-1 written out, so identity poses round-trip to the bit
    pts = torch.stack([(u - cx) / fx * z, (v - cy) / fy * z, z], 1).reshape(B, 3, -1)

    T = pose_vec_to_transform(pose_t2s)
    pts = T[:, :3, :3] @ pts + T[:, :3, 3:]
    X, Y, Z = pts[:, 0], pts[:, 1], pts[:, 2].clamp(min=1e-6)
    us = fx.view(B, 1) * X / Z + cx.view(B, 1)
    vs = fy.view(B, 1) * Y / Z + cy.view(B, 1)
    return torch.stack([us, vs], -1).view(B, H, W, 2)


def bilinear_sample(img: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    """Sample ``img`` (B, C, H, W) at pixel coordinates ``coords`` (B, h, w, 2).

    Neighbours outside the image contribute zero.  Gradients flow to both the
    image and the coordinates.
    """
    B, C, H, W = img.shape
    if coords.shape[0] != B or coords.shape[-1] != 2:
        raise ShapeError(f"coords of shape {tuple(coords.shape)} do not match image batch {B}")
    h, w = coords.shape[1:3]
    x = coords[..., 0].reshape(B, -1)
    y = coords[..., 1].reshape(B, -1)
    x0 = torch.floor(x)
    y0 = torch.floor(y)
    wx1 = x - x0
    wy1 = y - y0
    wx0 = 1.0 - wx1
    wy0 = 1.0 - wy1
    x0 = x0.long()
    y0 = y0.long()
    x1 = x0 + 1
    y1 = y0 + 1

    flat = img.reshape(B, C, H * W)
    out = img.new_zeros(B, C, h * w)
    for xi, yi, wgt in ((x0, y0, wx0 * wy0), (x1, y0, wx1 * wy0), (x0, y1, wx0 * wy1), (x1, y1, wx1 * wy1)):
        inside = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
        idx = (yi.clamp(0, H - 1) * W + xi.clamp(0, W - 1)).unsqueeze(1).expand(B, C, -1)
        vals = torch.gather(flat, 2, idx)
        out = out + vals * (wgt * inside.to(img.dtype)).unsqueeze(1)
    return out.view(B, C, h, w)


def inverse_warp(source_img: torch.Tensor, target_depth: torch.Tensor, pose_t2s: torch.Tensor, K):
    """Synthesize the target view by sampling ``source_img``.

    Returns ``(warped, valid_mask)`` where ``valid_mask`` (B, 1, H, W) is 1 where
    the projected coordinate lies inside the source image.
    """
    if target_depth.dim() == 3:
        target_depth = target_depth.unsqueeze(1)
    if source_img.shape[0] != target_depth.shape[0] or source_img.shape[-2:] != target_depth.shape[-2:]:
        raise ShapeError(
            f"image {tuple(source_img.shape)} and depth {tuple(target_depth.shape)} disagree"
        )
    if isinstance(K, CameraIntrinsics) and (K.width, K.height) != tuple(source_img.shape[-1:-3:-1]):
        raise ShapeError(
            f"intrinsics are for {K.width}x{K.height}, image is "
            f"{source_img.shape[-1]}x{source_img.shape[-2]}"
        )
    if not (target_depth > 0).all():
        raise ValueError("depth must be strictly positive")
    H, W = source_img.shape[-2:]
    coords = project_coords(target_depth, pose_t2s, K)
    warped = bilinear_sample(source_img, coords)
    u, v = coords[..., 0], coords[..., 1]
    valid = (
        (u > -_BOUNDS_EPS) & (u < W - 1 + _BOUNDS_EPS) & (v > -_BOUNDS_EPS) & (v < H - 1 + _BOUNDS_EPS)
    )
    return warped, valid.unsqueeze(1).to(source_img.dtype)


def rotation_angle(R: torch.Tensor) -> torch.Tensor:
    """Geodesic angle (radians) of rotation matrices."""
    tr = R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2]
    return torch.acos(((tr - 1.0) / 2.0).clamp(-1.0, 1.0))


def deg(x: float) -> float:
    return x * 180.0 / math.pi
