"""Forward compute operations on NCHW arrays.

Everything here is a pure function: inputs are never modified and results
depend only on the arguments (dropout takes an explicit generator).  The
convolution runs as im2col + one BLAS matmul; patch extraction and the
pooling loops go through the selected kernel backend.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ShapeError


@dataclass(frozen=True)
class ConvParams:
    """Weights (out, in, kh, kw), optional bias (out,), stride and symmetric
    zero padding of one convolution layer."""

    weights: np.ndarray
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        w = self.weights
        if w.ndim != 4:
            raise ShapeError(f"conv weights must be rank 4, got shape {w.shape}")
        if w.shape[2] != w.shape[3]:
            raise ShapeError(f"conv kernels must be square, got {w.shape[2]}x{w.shape[3]}")
        if self.bias is not None and self.bias.shape != (w.shape[0],):
            raise ShapeError(
                f"conv bias must have shape ({w.shape[0]},), got {self.bias.shape}"
            )
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel(self):
        return self.weights.shape[2]

    def check_network_geometry(self):
        """Enforce the filter/stride menu the network actually uses."""
        if self.kernel not in (1, 3, 5, 7):
            raise ValueError(f"network conv kernels must be 1/3/5/7, got {self.kernel}")
        if self.stride not in (1, 2, 3):
            raise ValueError(f"network conv strides must be 1/2/3, got {self.stride}")


def conv_output_extent(extent, k, stride, pad):
    return (extent + 2 * pad - k) // stride + 1


def pool_output_extent(extent, k, stride, pad, ceil_mode):
    """Pooling output size; ceil_mode rounds up but never lets a window
    start beyond the real input."""
    span = extent + 2 * pad - k
    if span < 0:
        raise ShapeError(f"pool window {k} larger than padded extent {extent + 2 * pad}")
    out = (-(-span // stride) if ceil_mode else span // stride) + 1
    if ceil_mode and (out - 1) * stride >= extent + pad:
        out -= 1
    return out


def conv_geometry(x_shape, w_shape, stride, pad):
    """Validate a conv configuration and return its output extents."""
    b, c, h, w = x_shape
    o, ci, kh, kw = w_shape
    if ci != c:
        raise ShapeError(f"conv2d: input has {c} channels but weights expect {ci}")
    if pad >= kh:
        raise ValueError(f"conv2d: padding {pad} must be smaller than kernel {kh}")
    oh = conv_output_extent(h, kh, stride, pad)
    ow = conv_output_extent(w, kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: non-positive output size {oh}x{ow} for input {h}x{w}")
    return oh, ow


def conv2d(x, weights, bias=None, *, stride=1, pad=0):
    """2-D cross-correlation with symmetric zero padding.

    ``weights`` may be a ConvParams, in which case the remaining arguments
    are taken from it.
    """
    if isinstance(weights, ConvParams):
        p = weights
        weights, bias, stride, pad = p.weights, p.bias, p.stride, p.padding
    x = np.ascontiguousarray(x)
    b, c, h, w = x.shape
    o, _, kh, kw = weights.shape
    oh, ow = conv_geometry(x.shape, weights.shape, stride, pad)
    cols = unfold(x, kh, kw, stride, pad)
    out = np.matmul(weights.reshape(o, c * kh * kw), cols)
    if bias is not None:
        out += bias.reshape(1, o, 1)
    return out.reshape(b, o, oh, ow)


def unfold(x, kh, kw, stride, pad):
    """im2col with a fast path for 1x1 kernels (a strided reshape)."""
    if kh == 1 and kw == 1 and pad == 0:
        b, c = x.shape[:2]
        v = x[:, :, ::stride, ::stride]
        return v.reshape(b, c, v.shape[2] * v.shape[3])
    return backend.kernels.im2col(x, kh, kw, stride, pad)


def fold(cols, h, w, kh, kw, stride, pad):
    """Adjoint of unfold: scatter-add columns back onto the input grid."""
    if kh == 1 and kw == 1 and pad == 0:
        b, c = cols.shape[:2]
        oh = conv_output_extent(h, 1, stride, 0)
        ow = conv_output_extent(w, 1, stride, 0)
        out = np.zeros((b, c, h, w), dtype=cols.dtype)
        out[:, :, ::stride, ::stride] = cols.reshape(b, c, oh, ow)
        return out
    return backend.kernels.col2im(np.ascontiguousarray(cols), h, w, kh, kw, stride, pad)


def pool2d(x, kind, k, stride, *, pad=0, ceil_mode=False):
    """Max or average pooling.  Max ignores padding cells; avg divides by
    the number of valid cells under each window."""
    x = np.ascontiguousarray(x)
    if x.ndim != 4:
        raise ShapeError(f"pool2d expects rank-4 input, got {x.shape}")
    h, w = x.shape[2], x.shape[3]
    oh = pool_output_extent(h, k, stride, pad, ceil_mode)
    ow = pool_output_extent(w, k, stride, pad, ceil_mode)
    if kind == "max":
        out, _ = backend.kernels.maxpool_forward(x, k, stride, pad, oh, ow)
        return out
    if kind == "avg":
        return backend.kernels.avgpool_forward(x, k, stride, pad, oh, ow)
    raise ValueError(f"pool kind must be 'max' or 'avg', got {kind!r}")


def relu(x):
    return np.maximum(x, 0)


def linear(x, w, b=None):
    """(batch, features) @ w.T + b with w shaped (out, features)."""
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeError(f"linear expects 2-D input and weights, got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"linear: input has {x.shape[1]} features but weights expect {w.shape[1]}")
    out = x @ w.T
    if b is not None:
        out += b
    return out


def softmax(x):
    """Row softmax with max subtraction for stability."""
    x = np.asarray(x)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def dropout(x, rate, mode, rng=None):
    """Inverted dropout: train mode zeroes with probability ``rate`` and
    scales survivors by 1/(1-rate); infer mode is the identity."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "infer"):
        raise ValueError(f"dropout mode must be 'train' or 'infer', got {mode!r}")
    if mode == "infer" or rate == 0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an explicit rng")
    return x * dropout_mask(x.shape, rate, rng, x.dtype)


def dropout_mask(shape, rate, rng, dtype):
    """The multiplicative mask train-mode dropout applies (for reuse in
    the backward pass)."""
    keep = (rng.random(shape) >= rate).astype(dtype)
    return keep / dtype.type(1 - rate)


def concat_channels(inputs):
    """Concatenate along the channel axis; batch and spatial extents must
    agree across branches."""
    if not inputs:
        raise ValueError("concat_channels needs at least one input")
    ref = inputs[0]
    for i, t in enumerate(inputs):
        if t.shape[0] != ref.shape[0] or t.shape[2:] != ref.shape[2:]:
            raise ShapeError(
                f"concat_channels: branch {i} has shape {t.shape}, "
                f"incompatible with branch 0 shape {ref.shape}"
            )
    return np.concatenate(inputs, axis=1)
