"""Reverse-mode differentiation on a gradient tape.

A Tape records one backward closure per executed operation, in execution
order.  ``Tape.backward`` seeds the scalar loss gradient and replays the
closures in exact reverse order; gradients accumulate additively on each
Var, which gives the sum rule at fan-out points for free.

The differentiable ops here mirror the plain functions in
:mod:`googlenet.ops` and share their kernels and validation.
"""

import numpy as np

from . import backend, ops
from .errors import ShapeError


class Var:
    """A value plus its gradient accumulator (same shape, lazily created)."""

    __slots__ = ("data", "grad", "softmax_of")

    def __init__(self, data):
        self.data = np.asarray(data)
        self.grad = None
        self.softmax_of = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Var(shape={self.data.shape}, dtype={self.data.dtype})"


def _accumulate(var, g):
    var.grad = g if var.grad is None else var.grad + g


class Tape:
    """Ordered record of executed operations, replayed backward once."""

    def __init__(self):
        self._steps = []
        self._replayed = False

    def record(self, fn):
        self._steps.append(fn)

    def __len__(self):
        return len(self._steps)

    def backward(self, loss, seed=1.0):
        if not self._steps:
            raise RuntimeError("backward called before any forward operation was recorded")
        if self._replayed:
            raise RuntimeError("tape was already replayed backward")
        if loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        self._replayed = True
        loss.grad = np.full_like(loss.data, seed)
        for fn in reversed(self._steps):
            fn()


def wrap_params(params):
    """dict of arrays -> dict of Vars (shared data, fresh accumulators)."""
    return {name: Var(p) for name, p in params.items()}


def collect_grads(variables):
    """Gradient per named Var; unreachable ones get zeros."""
    return {
        name: (v.grad if v.grad is not None else np.zeros_like(v.data))
        for name, v in variables.items()
    }


def conv2d(tape, x, w, b=None, *, stride=1, pad=0):
    xd = np.ascontiguousarray(x.data)
    bn, c, h, wd = xd.shape
    o, _, kh, kw = w.data.shape
    oh, ow = ops.conv_geometry(xd.shape, w.data.shape, stride, pad)
    cols = ops.unfold(xd, kh, kw, stride, pad)
    y = np.matmul(w.data.reshape(o, c * kh * kw), cols)
    if b is not None:
        y += b.data.reshape(1, o, 1)
    out = Var(y.reshape(bn, o, oh, ow))

    def back():
        if out.grad is None:
            return
        g = out.grad.reshape(bn, o, oh * ow)
        if b is not None:
            _accumulate(b, g.sum(axis=(0, 2)))
        _accumulate(w, np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape))
        dcols = np.matmul(w.data.reshape(o, c * kh * kw).T, g)
        _accumulate(x, ops.fold(dcols, h, wd, kh, kw, stride, pad))

    tape.record(back)
    return out


def linear(tape, x, w, b=None):
    out = Var(ops.linear(x.data, w.data, None if b is None else b.data))

    def back():
        if out.grad is None:
            return
        g = out.grad
        if b is not None:
            _accumulate(b, g.sum(axis=0))
        _accumulate(w, g.T @ x.data)
        _accumulate(x, g @ w.data)

    tape.record(back)
    return out


def relu(tape, x):
    out = Var(ops.relu(x.data))

    def back():
        if out.grad is None:
            return
        _accumulate(x, out.grad * (x.data > 0))

    tape.record(back)
    return out


def pool2d(tape, x, kind, k, stride, *, pad=0, ceil_mode=False):
    xd = np.ascontiguousarray(x.data)
    h, w = xd.shape[2], xd.shape[3]
    oh = ops.pool_output_extent(h, k, stride, pad, ceil_mode)
    ow = ops.pool_output_extent(w, k, stride, pad, ceil_mode)
    if kind == "max":
        y, argmax = backend.kernels.maxpool_forward(xd, k, stride, pad, oh, ow)
    elif kind == "avg":
        y = backend.kernels.avgpool_forward(xd, k, stride, pad, oh, ow)
    else:
        raise ValueError(f"pool kind must be 'max' or 'avg', got {kind!r}")
    out = Var(y)

    def back():
        if out.grad is None:
            return
        g = np.ascontiguousarray(out.grad)
        if kind == "max":
            _accumulate(x, backend.kernels.maxpool_backward(g, argmax, h, w))
        else:
            _accumulate(x, backend.kernels.avgpool_backward(g, h, w, k, stride, pad))

    tape.record(back)
    return out


def flatten(tape, x):
    shape = x.data.shape
    out = Var(x.data.reshape(shape[0], -1))

    def back():
        if out.grad is None:
            return
        _accumulate(x, out.grad.reshape(shape))

    tape.record(back)
    return out


def concat_channels(tape, xs):
    out = Var(ops.concat_channels([v.data for v in xs]))
    widths = [v.data.shape[1] for v in xs]

    def back():
        if out.grad is None:
            return
        start = 0
        for v, width in zip(xs, widths):
            _accumulate(v, out.grad[:, start : start + width])
            start += width

    tape.record(back)
    return out


def dropout(tape, x, rate, mode, rng=None):
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "infer"):
        raise ValueError(f"dropout mode must be 'train' or 'infer', got {mode!r}")
    if mode == "infer" or rate == 0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an explicit rng")
    mask = ops.dropout_mask(x.data.shape, rate, rng, x.data.dtype)
    out = Var(x.data * mask)

    def back():
        if out.grad is None:
            return
        _accumulate(x, out.grad * mask)

    tape.record(back)
    return out


def softmax(tape, x):
    out = Var(ops.softmax(x.data))
    out.softmax_of = x

    def back():
        if out.grad is None:
            return
        g, p = out.grad, out.data
        _accumulate(x, p * (g - (g * p).sum(axis=-1, keepdims=True)))

    tape.record(back)
    return out


def cross_entropy(tape, probs, labels):
    """Mean negative log-likelihood of the labels under ``probs``.

    When ``probs`` came from :func:`softmax`, the backward pass is fused:
    the gradient (probs - onehot)/batch flows directly into the softmax
    input, bypassing the softmax Jacobian.
    """
    p = probs.data
    labels = np.asarray(labels)
    n, classes = p.shape
    if n == 0:
        raise ValueError("cross_entropy needs at least one example")
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"label out of range [0, {classes})")
    picked = p[np.arange(n), labels]
    out = Var(np.asarray(-np.log(picked).mean(), dtype=p.dtype))
    logits = probs.softmax_of

    def back():
        if out.grad is None:
            return
        g = out.grad
        if logits is not None:
            d = p.copy()
            d[np.arange(n), labels] -= 1
            _accumulate(logits, g * d / p.dtype.type(n))
        else:
            d = np.zeros_like(p)
            d[np.arange(n), labels] = -1.0 / (picked * n)
            _accumulate(probs, g * d)

    tape.record(back)
    return out


def composite_loss(tape, main, aux=(), weight=0.3):
    """Total loss: main plus the discount-weighted sum of auxiliary losses."""
    if weight < 0:
        raise ValueError(f"auxiliary loss weight must be >= 0, got {weight}")
    total = main.data + weight * sum(a.data for a in aux)
    out = Var(np.asarray(total, dtype=main.data.dtype))

    def back():
        if out.grad is None:
            return
        _accumulate(main, out.grad)
        for a in aux:
            _accumulate(a, np.asarray(weight * out.grad, dtype=a.data.dtype))

    tape.record(back)
    return out


def weighted_sum(tape, x, coeffs):
    """Scalar projection sum(x * coeffs); handy as a test loss head."""
    out = Var(np.asarray((x.data * coeffs).sum(), dtype=x.data.dtype))

    def back():
        if out.grad is None:
            return
        _accumulate(x, out.grad * np.asarray(coeffs, dtype=x.data.dtype))

    tape.record(back)
    return out
