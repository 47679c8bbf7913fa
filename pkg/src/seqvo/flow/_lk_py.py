"""Pure numpy implementation of the dense Lucas-Kanade refinement kernel.

Drop-in replacement for the compiled ``_lk`` extension; both must agree to
floating-point rounding.
"""

import numpy as np


def _box_sum(x, radius):
    """Sum of ``x`` over a (2r+1)^2 window clipped to the image."""
    H, W = x.shape
    S = np.zeros((H + 1, W + 1))
    S[1:, 1:] = x.cumsum(0).cumsum(1)
    y0 = np.clip(np.arange(H) - radius, 0, H)
    y1 = np.clip(np.arange(H) + radius + 1, 0, H)
    x0 = np.clip(np.arange(W) - radius, 0, W)
    x1 = np.clip(np.arange(W) + radius + 1, 0, W)
    return S[y1][:, x1] - S[y0][:, x1] - S[y1][:, x0] + S[y0][:, x0]


def _gradients(a):
    H, W = a.shape
    xp = np.minimum(np.arange(W) + 1, W - 1)
    xm = np.maximum(np.arange(W) - 1, 0)
    yp = np.minimum(np.arange(H) + 1, H - 1)
    ym = np.maximum(np.arange(H) - 1, 0)
    return 0.5 * (a[:, xp] - a[:, xm]), 0.5 * (a[yp, :] - a[ym, :])


def _sample_clamped(b, xs, ys):
    H, W = b.shape
    xs = np.clip(xs, 0.0, W - 1.0)
    ys = np.clip(ys, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), W - 1)
    y0 = np.minimum(np.floor(ys).astype(np.intp), H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = xs - x0
    fy = ys - y0
    top = b[y0, x0] * (1.0 - fx) + b[y0, x1] * fx
    bot = b[y1, x0] * (1.0 - fx) + b[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def lk_refine(a, b, flow, radius, iterations, reg):
    """Refine ``flow`` (H, W, 2) in place so that ``a(x) ~ b(x + flow(x))``."""
    H, W = a.shape
    Ix, Iy = _gradients(a)
    Gxx = _box_sum(Ix * Ix, radius) + reg
    Gxy = _box_sum(Ix * Iy, radius)
    Gyy = _box_sum(Iy * Iy, radius) + reg
    det = Gxx * Gyy - Gxy * Gxy
    gx, gy = np.meshgrid(np.arange(W, dtype=np.float64), np.arange(H, dtype=np.float64))
    for _ in range(iterations):
        It = _sample_clamped(b, gx + flow[..., 0], gy + flow[..., 1]) - a
        ex = _box_sum(Ix * It, radius)
        ey = _box_sum(Iy * It, radius)
        flow[..., 0] -= (Gyy * ex - Gxy * ey) / det
        flow[..., 1] -= (Gxx * ey - Gxy * ex) / det
    return flow
