# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense Lucas-Kanade refinement kernel (see ``_lk_py`` for the reference)."""

import numpy as np
from libc.math cimport floor


cdef void _box_sum(const double[:, ::1] x, double[:, ::1] S, double[:, ::1] out,
                   Py_ssize_t radius) noexcept nogil:
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1]
    cdef Py_ssize_t i, j, y0, y1, x0, x1
    for i in range(H + 1):
        S[i, 0] = 0.0
    for j in range(W + 1):
        S[0, j] = 0.0
    for i in range(H):
        for j in range(W):
            S[i + 1, j + 1] = x[i, j] + S[i, j + 1] + S[i + 1, j] - S[i, j]
    for i in range(H):
        y0 = i - radius
        if y0 < 0:
            y0 = 0
        y1 = i + radius + 1
        if y1 > H:
            y1 = H
        for j in range(W):
            x0 = j - radius
            if x0 < 0:
                x0 = 0
            x1 = j + radius + 1
            if x1 > W:
                x1 = W
            out[i, j] = S[y1, x1] - S[y0, x1] - S[y1, x0] + S[y0, x0]


cdef inline double _sample(const double[:, ::1] b, double xs, double ys) noexcept nogil:
    cdef Py_ssize_t H = b.shape[0], W = b.shape[1]
    cdef Py_ssize_t x0, y0, x1, y1
    cdef double fx, fy
    if xs < 0.0:
        xs = 0.0
    elif xs > W - 1.0:
        xs = W - 1.0
    if ys < 0.0:
        ys = 0.0
    elif ys > H - 1.0:
        ys = H - 1.0
    x0 = <Py_ssize_t>floor(xs)
    y0 = <Py_ssize_t>floor(ys)
    if x0 > W - 1:
        x0 = W - 1
    if y0 > H - 1:
        y0 = H - 1
    x1 = x0 + 1 if x0 + 1 < W else W - 1
    y1 = y0 + 1 if y0 + 1 < H else H - 1
    fx = xs - x0
    fy = ys - y0
    return ((b[y0, x0] * (1.0 - fx) + b[y0, x1] * fx) * (1.0 - fy)
            + (b[y1, x0] * (1.0 - fx) + b[y1, x1] * fx) * fy)


def lk_refine(const double[:, ::1] a, const double[:, ::1] b, double[:, :, ::1] flow,
              int radius, int iterations, double reg):
    """Refine ``flow`` (H, W, 2) in place so that ``a(x) ~ b(x + flow(x))``."""
    cdef Py_ssize_t H = a.shape[0], W = a.shape[1]
    cdef Py_ssize_t i, j, xp, xm, yp, ym
    cdef int it
    cdef double gxx, gxy, gyy, det

    Ix_a = np.empty((H, W))
    Iy_a = np.empty((H, W))
    tmp_a = np.empty((H, W))
    tmp2_a = np.empty((H, W))
    S_a = np.empty((H + 1, W + 1))
    Gxx_a = np.empty((H, W))
    Gxy_a = np.empty((H, W))
    Gyy_a = np.empty((H, W))
    ex_a = np.empty((H, W))
    ey_a = np.empty((H, W))
    cdef double[:, ::1] Ix = Ix_a, Iy = Iy_a, tmp = tmp_a, tmp2 = tmp2_a, S = S_a
    cdef double[:, ::1] Gxx = Gxx_a, Gxy = Gxy_a, Gyy = Gyy_a, ex = ex_a, ey = ey_a

    with nogil:
        for i in range(H):
            yp = i + 1 if i + 1 < H else H - 1
            ym = i - 1 if i > 0 else 0
            for j in range(W):
                xp = j + 1 if j + 1 < W else W - 1
                xm = j - 1 if j > 0 else 0
                Ix[i, j] = 0.5 * (a[i, xp] - a[i, xm])
                Iy[i, j] = 0.5 * (a[yp, j] - a[ym, j])

        for i in range(H):
            for j in range(W):
                tmp[i, j] = Ix[i, j] * Ix[i, j]
        _box_sum(tmp, S, Gxx, radius)
        for i in range(H):
            for j in range(W):
                tmp[i, j] = Ix[i, j] * Iy[i, j]
        _box_sum(tmp, S, Gxy, radius)
        for i in range(H):
            for j in range(W):
                tmp[i, j] = Iy[i, j] * Iy[i, j]
        _box_sum(tmp, S, Gyy, radius)

        for it in range(iterations):
            for i in range(H):
                for j in range(W):
                    # tmp <- temporal residual; reuse tmp2 for the y product
                    tmp[i, j] = _sample(b, j + flow[i, j, 0], i + flow[i, j, 1]) - a[i, j]
                    tmp2[i, j] = Iy[i, j] * tmp[i, j]
                    tmp[i, j] = Ix[i, j] * tmp[i, j]
            _box_sum(tmp, S, ex, radius)
            _box_sum(tmp2, S, ey, radius)
            for i in range(H):
                for j in range(W):
                    gxx = Gxx[i, j] + reg
                    gyy = Gyy[i, j] + reg
                    gxy = Gxy[i, j]
                    det = gxx * gyy - gxy * gxy
                    flow[i, j, 0] -= (gyy * ex[i, j] - gxy * ey[i, j]) / det
                    flow[i, j, 1] -= (gxx * ey[i, j] - gxy * ex[i, j]) / det
    return np.asarray(flow)
