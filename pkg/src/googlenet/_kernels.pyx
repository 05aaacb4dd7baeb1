# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-loop kernels: im2col/col2im and pooling forward/backward.

Semantics (including summation order and argmax tie-breaking) mirror
googlenet.kernels_py exactly so the two backends are interchangeable.
"""

import numpy as np

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    out_np = np.zeros((b, c * kh * kw, oh * ow), dtype=np.asarray(x).dtype)
    cdef real[:, :, ::1] out = out_np
    cdef Py_ssize_t bi, ci, ky, kx, oy, ox, y, xx, row
    for bi in range(b):
        for ci in range(c):
            for ky in range(kh):
                for kx in range(kw):
                    row = (ci * kh + ky) * kw + kx
                    for oy in range(oh):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= h:
                            continue
                        for ox in range(ow):
                            xx = ox * stride - pad + kx
                            if 0 <= xx < w:
                                out[bi, row, oy * ow + ox] = x[bi, ci, y, xx]
    return out_np


def col2im(real[:, :, ::1] cols, int h, int w, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t b = cols.shape[0]
    cdef Py_ssize_t c = cols.shape[1] // (kh * kw)
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    out_np = np.zeros((b, c, h, w), dtype=np.asarray(cols).dtype)
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t bi, ci, ky, kx, oy, ox, y, xx, row
    for bi in range(b):
        for ci in range(c):
            for ky in range(kh):
                for kx in range(kw):
                    row = (ci * kh + ky) * kw + kx
                    for oy in range(oh):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= h:
                            continue
                        for ox in range(ow):
                            xx = ox * stride - pad + kx
                            if 0 <= xx < w:
                                out[bi, ci, y, xx] += cols[bi, row, oy * ow + ox]
    return out_np


def maxpool_forward(real[:, :, :, ::1] x, int k, int stride, int pad, int oh, int ow):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    out_np = np.zeros((b, c, oh, ow), dtype=np.asarray(x).dtype)
    arg_np = np.empty((b, c, oh, ow), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_np
    cdef long long[:, :, :, ::1] arg = arg_np
    cdef Py_ssize_t bi, ci, oy, ox, ky, kx, y, xx
    cdef long long best_at
    cdef real v, best
    for bi in range(b):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    best = 0
                    best_at = -1
                    for ky in range(k):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= h:
                            continue
                        for kx in range(k):
                            xx = ox * stride - pad + kx
                            if xx < 0 or xx >= w:
                                continue
                            v = x[bi, ci, y, xx]
                            if best_at < 0 or v > best:
                                best = v
                                best_at = y * w + xx
                    if best_at >= 0:
                        out[bi, ci, oy, ox] = best
                    arg[bi, ci, oy, ox] = best_at
    return out_np, arg_np


def maxpool_backward(real[:, :, :, ::1] dout, long long[:, :, :, ::1] argmax, int h, int w):
    cdef Py_ssize_t b = dout.shape[0], c = dout.shape[1]
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    dx_np = np.zeros((b, c, h, w), dtype=np.asarray(dout).dtype)
    cdef real[:, :, :, ::1] dx = dx_np
    cdef Py_ssize_t bi, ci, oy, ox
    cdef long long at
    for bi in range(b):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    at = argmax[bi, ci, oy, ox]
                    if at >= 0:
                        dx[bi, ci, at // w, at % w] += dout[bi, ci, oy, ox]
    return dx_np


def avgpool_forward(real[:, :, :, ::1] x, int k, int stride, int pad, int oh, int ow):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    out_np = np.zeros((b, c, oh, ow), dtype=np.asarray(x).dtype)
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t bi, ci, oy, ox, ky, kx, y, xx, cnt
    cdef real s
    for bi in range(b):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    s = 0
                    cnt = 0
                    for ky in range(k):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= h:
                            continue
                        for kx in range(k):
                            xx = ox * stride - pad + kx
                            if xx < 0 or xx >= w:
                                continue
                            s += x[bi, ci, y, xx]
                            cnt += 1
                    if cnt > 0:
                        out[bi, ci, oy, ox] = s / <real> cnt
    return out_np


def avgpool_backward(real[:, :, :, ::1] dout, int h, int w, int k, int stride, int pad):
    cdef Py_ssize_t b = dout.shape[0], c = dout.shape[1]
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    dx_np = np.zeros((b, c, h, w), dtype=np.asarray(dout).dtype)
    cdef real[:, :, :, ::1] dx = dx_np
    cdef Py_ssize_t bi, ci, oy, ox, ky, kx, y, xx, cnt
    cdef real g
    for bi in range(b):
        for ci in range(c):
            for ky in range(k):
                for kx in range(k):
                    for oy in range(oh):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= h:
                            continue
                        for ox in range(ow):
                            xx = ox * stride - pad + kx
                            if xx < 0 or xx >= w:
                                continue
                            cnt = _count(h, w, k, stride, pad, oy, ox)
                            dx[bi, ci, y, xx] += dout[bi, ci, oy, ox] / <real> cnt
    return dx_np


cdef inline Py_ssize_t _count(Py_ssize_t h, Py_ssize_t w, int k, int stride, int pad,
                              Py_ssize_t oy, Py_ssize_t ox) nogil:
    cdef Py_ssize_t y0 = oy * stride - pad
    cdef Py_ssize_t x0 = ox * stride - pad
    cdef Py_ssize_t ny = min(y0 + k, h) - max(y0, 0)
    cdef Py_ssize_t nx = min(x0 + k, w) - max(x0, 0)
    if ny < 0:
        ny = 0
    if nx < 0:
        nx = 0
    return ny * nx
