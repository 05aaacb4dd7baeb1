"""Pure-numpy implementations of the hot inner-loop kernels.

This module is the fallback backend used when the compiled extension
(``googlenet._kernels``) is not available.  Both backends expose the same
six functions and must produce bitwise-identical results; the test suite
cross-checks them whenever the extension is importable.

Layout conventions: activations are (batch, channels, height, width),
row-major and C-contiguous.  ``cols`` matrices are (batch, C*kh*kw, OH*OW)
with the kernel offset varying faster than the channel.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _conv_out(extent, k, stride, pad):
    return (extent + 2 * pad - k) // stride + 1


def im2col(x, kh, kw, stride, pad):
    """Unfold conv patches of a zero-padded NCHW array into a cols matrix."""
    b, c, h, w = x.shape
    oh = _conv_out(h, kh, stride, pad)
    ow = _conv_out(w, kw, stride, pad)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :oh, :ow]
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, oh * ow)


def col2im(cols, h, w, kh, kw, stride, pad):
    """Scatter-add a cols matrix back onto the (zero-padded) input grid.

    Exact adjoint of :func:`im2col`; used for conv input gradients.
    """
    b = cols.shape[0]
    c = cols.shape[1] // (kh * kw)
    oh = _conv_out(h, kh, stride, pad)
    ow = _conv_out(w, kw, stride, pad)
    cols = cols.reshape(b, c, kh, kw, oh, ow)
    out = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ky in range(kh):
        for kx in range(kw):
            out[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride] += cols[
                :, :, ky, kx
            ]
    if pad:
        out = np.ascontiguousarray(out[:, :, pad : pad + h, pad : pad + w])
    return out


def _padded(x, k, stride, pad, oh, ow, fill):
    """Pad top/left by `pad` and bottom/right far enough for all windows."""
    b, c, h, w = x.shape
    pad_b = max(pad, (oh - 1) * stride + k - pad - h)
    pad_r = max(pad, (ow - 1) * stride + k - pad - w)
    xp = np.full((b, c, h + pad + pad_b, w + pad + pad_r), fill, dtype=x.dtype)
    xp[:, :, pad : pad + h, pad : pad + w] = x
    return xp


def _valid_counts(h, w, k, stride, pad, oh, ow, dtype):
    """Number of non-padding cells under each pooling window."""
    pad_b = max(pad, (oh - 1) * stride + k - pad - h)
    pad_r = max(pad, (ow - 1) * stride + k - pad - w)
    mask = np.zeros((h + pad + pad_b, w + pad + pad_r), dtype=dtype)
    mask[pad : pad + h, pad : pad + w] = 1
    win = sliding_window_view(mask, (k, k))[::stride, ::stride][:oh, :ow]
    return win.sum(axis=(-2, -1))


def maxpool_forward(x, k, stride, pad, oh, ow):
    """Window maximum ignoring padding cells.

    Returns (out, argmax) where argmax holds the flat y*W+x index of the
    winning input cell (first maximum in row-major window order), or -1
    for a window with no valid cell.
    """
    b, c, h, w = x.shape
    xp = _padded(x, k, stride, pad, oh, ow, -np.inf)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    flat = win.reshape(b, c, oh, ow, k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    gy = (np.arange(oh) * stride - pad)[None, None, :, None] + arg // k
    gx = (np.arange(ow) * stride - pad)[None, None, None, :] + arg % k
    idx = gy * w + gx
    empty = np.isneginf(out)
    if empty.any():
        idx = np.where(empty, -1, idx)
        out = np.where(empty, x.dtype.type(0), out)
    return np.ascontiguousarray(out), np.ascontiguousarray(idx.astype(np.int64))


def maxpool_backward(dout, argmax, h, w):
    b, c, oh, ow = dout.shape
    dx = np.zeros((b * c, h * w), dtype=dout.dtype)
    am = argmax.reshape(b * c, oh * ow)
    g = dout.reshape(b * c, oh * ow)
    rows = np.broadcast_to(np.arange(b * c)[:, None], am.shape)
    valid = am >= 0
    np.add.at(dx, (rows[valid], am[valid]), g[valid])
    return dx.reshape(b, c, h, w)


def avgpool_forward(x, k, stride, pad, oh, ow):
    """Window mean over valid (non-padding) cells only."""
    b, c, h, w = x.shape
    xp = _padded(x, k, stride, pad, oh, ow, 0)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    s = win.reshape(b, c, oh, ow, k * k).sum(axis=-1)
    cnt = _valid_counts(h, w, k, stride, pad, oh, ow, x.dtype)
    out = s / np.maximum(cnt, 1)
    return np.ascontiguousarray(out)


def avgpool_backward(dout, h, w, k, stride, pad):
    b, c, oh, ow = dout.shape
    cnt = _valid_counts(h, w, k, stride, pad, oh, ow, dout.dtype)
    g = dout / np.maximum(cnt, 1)
    pad_b = max(pad, (oh - 1) * stride + k - pad - h)
    pad_r = max(pad, (ow - 1) * stride + k - pad - w)
    acc = np.zeros((b, c, h + pad + pad_b, w + pad + pad_r), dtype=dout.dtype)
    for ky in range(k):
        for kx in range(k):
            acc[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride] += g
    return np.ascontiguousarray(acc[:, :, pad : pad + h, pad : pad + w])
