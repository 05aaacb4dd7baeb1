"""The standard finite-difference battery over every backward rule.

Used by the `gradcheck` CLI command and the acceptance suite: conv2d at
kernel sizes 1/3/5/7, average pooling (floor and ceil geometry), linear,
softmax + cross-entropy, channel concat, and one full dimension-reduced
Inception module, each at several random fp64 points.

Points are resampled when they land too close to a non-smooth spot: a
relu pre-activation at zero, or a pooling window whose two largest cells
nearly tie (the finite-difference step could flip the argmax).

Case functions take (tape, *vars, coeffs) and reduce the operation output
to a scalar with the fixed random projection ``coeffs``; passing
``coeffs=None`` returns the raw output instead (used to size the
projection and to probe relu margins).
"""

import zlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import autograd as ag
from .gradcheck import grad_check

_SMOOTH_TOL = 1e-3


def _project(tape, out, coeffs):
    return out if coeffs is None else ag.weighted_sum(tape, out, coeffs)


def _max_gap_ok(x, k, stride, pad):
    """True when every pooling window's top two cells are well separated."""
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = win.reshape(*win.shape[:4], -1)
    top2 = np.sort(flat, axis=-1)[..., -2:]
    gaps = top2[..., 1] - top2[..., 0]
    return bool((gaps[np.isfinite(gaps)] > _SMOOTH_TOL).all())


def _conv_case(k, stride, pad, shape, out_ch):
    def sample(rng):
        x = rng.standard_normal(shape)
        w = rng.standard_normal((out_ch, shape[1], k, k))
        b = rng.standard_normal(out_ch)
        return [x, w, b], True

    def fn(tape, x, w, b, coeffs):
        return _project(tape, ag.conv2d(tape, x, w, b, stride=stride, pad=pad), coeffs)

    return sample, fn


def _avgpool_case(shape, k, stride, pad, ceil_mode):
    def sample(rng):
        return [rng.standard_normal(shape)], True

    def fn(tape, x, coeffs):
        out = ag.pool2d(tape, x, "avg", k, stride, pad=pad, ceil_mode=ceil_mode)
        return _project(tape, out, coeffs)

    return sample, fn


def _linear_case():
    def sample(rng):
        return [rng.standard_normal((2, 6)), rng.standard_normal((4, 6)), rng.standard_normal(4)], True

    def fn(tape, x, w, b, coeffs):
        return _project(tape, ag.linear(tape, x, w, b), coeffs)

    return sample, fn


def _softmax_xent_case():
    labels = np.array([0, 3, 1])

    def sample(rng):
        return [rng.standard_normal((3, 5))], True

    def fn(tape, logits, coeffs):
        return ag.cross_entropy(tape, ag.softmax(tape, logits), labels)

    return sample, fn


def _concat_case():
    def sample(rng):
        return [rng.standard_normal((2, c, 4, 4)) for c in (2, 3, 1)], True

    def fn(tape, a, b, c, coeffs):
        return _project(tape, ag.concat_channels(tape, [a, b, c]), coeffs)

    return sample, fn


def _inception_case():
    shape = (1, 5, 6, 6)

    def sample(rng):
        x = rng.standard_normal(shape)
        arrays = [x]
        for out_ch, in_ch, k in ((4, 5, 1), (3, 5, 1), (4, 3, 3), (2, 5, 1), (3, 2, 5), (3, 5, 1)):
            arrays.append(rng.standard_normal((out_ch, in_ch, k, k)))
            arrays.append(rng.standard_normal(out_ch))
        return arrays, _max_gap_ok(x, 3, 1, 1)

    def fn(tape, x, w1, b1, wr3, br3, w3, b3, wr5, br5, w5, b5, wp, bp, coeffs):
        preacts = []

        def conv_relu(v, w, b, pad):
            c = ag.conv2d(tape, v, w, b, stride=1, pad=pad)
            preacts.append(c.data)
            return ag.relu(tape, c)

        branch1 = conv_relu(x, w1, b1, 0)
        branch3 = conv_relu(conv_relu(x, wr3, br3, 0), w3, b3, 1)
        branch5 = conv_relu(conv_relu(x, wr5, br5, 0), w5, b5, 2)
        pooled = ag.pool2d(tape, x, "max", 3, 1, pad=1)
        branch_p = conv_relu(pooled, wp, bp, 0)
        out = ag.concat_channels(tape, [branch1, branch3, branch5, branch_p])
        fn.min_preact = min(float(np.abs(p).min()) for p in preacts)
        return _project(tape, out, coeffs)

    return sample, fn


CASES = {
    "conv2d_1x1": _conv_case(1, 1, 0, (1, 3, 6, 6), 4),
    "conv2d_3x3": _conv_case(3, 1, 1, (1, 2, 5, 5), 3),
    "conv2d_5x5/2": _conv_case(5, 2, 2, (1, 2, 7, 7), 2),
    "conv2d_7x7/2": _conv_case(7, 2, 3, (1, 1, 9, 9), 2),
    "avgpool_3x3/2": _avgpool_case((1, 2, 6, 6), 3, 2, 1, False),
    "avgpool_ceil": _avgpool_case((1, 1, 7, 7), 3, 2, 0, True),
    "linear": _linear_case(),
    "softmax_xent": _softmax_xent_case(),
    "concat": _concat_case(),
    "inception_module": _inception_case(),
}


def _smooth_point(case_name, sample, fn, rng):
    """Draw until the point is safely away from every non-smooth spot."""
    for _ in range(50):
        arrays, ok = sample(rng)
        if not ok:
            continue
        # probe run: discovers the output shape and the relu margins
        out = fn(ag.Tape(), *[ag.Var(a.copy()) for a in arrays], None)
        if getattr(fn, "min_preact", np.inf) > _SMOOTH_TOL:
            return arrays, rng.standard_normal(out.data.shape)
    raise RuntimeError(f"could not sample a smooth point for {case_name}")


def run_battery(eps=1e-4, seed=0, points=10):
    """Yield (case name, max relative error over `points` random points)."""
    for name, (sample, fn) in CASES.items():
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        worst = 0.0
        for _ in range(points):
            arrays, coeffs = _smooth_point(name, sample, fn, rng)
            err = grad_check(lambda tape, *vs: fn(tape, *vs, coeffs), arrays, eps=eps)
            worst = max(worst, err)
        yield name, worst