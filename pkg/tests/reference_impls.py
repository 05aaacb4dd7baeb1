"""Independent reference implementations used as test oracles.

These are deliberately naive (explicit window loops, no im2col, no shared
kernels) so they stay independent of the production compute path.
"""

import numpy as np


def conv2d_reference(x, w, b=None, stride=1, pad=0):
    """Direct convolution by nested loops over every output element and
    every kernel tap.  Returns (output, multiply_add_count); the count
    includes taps over the zero padding, matching dense-kernel accounting.
    """
    bs, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((bs, o, oh, ow), dtype=np.float64)
    macs = 0
    for bi in range(bs):
        for oc in range(o):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0 if b is None else float(b[oc])
                    for ci in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                acc += float(x[bi, ci, oy * stride + i, ox * stride + j]) * float(
                                    w[oc, ci, i, j]
                                )
                                macs += 1
                    out[bi, oc, oy, ox] = acc
    return out, macs


def pool2d_reference(x, kind, k, stride, pad=0, ceil_mode=False):
    """Direct pooling with explicit valid-cell bookkeeping."""
    bs, c, h, w = x.shape
    span_h, span_w = h + 2 * pad - k, w + 2 * pad - k
    if ceil_mode:
        oh, ow = -(-span_h // stride) + 1, -(-span_w // stride) + 1
        if (oh - 1) * stride >= h + pad:
            oh -= 1
        if (ow - 1) * stride >= w + pad:
            ow -= 1
    else:
        oh, ow = span_h // stride + 1, span_w // stride + 1
    out = np.zeros((bs, c, oh, ow), dtype=np.float64)
    for bi in range(bs):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    cells = [
                        float(x[bi, ci, y, xx])
                        for y in range(oy * stride - pad, oy * stride - pad + k)
                        for xx in range(ox * stride - pad, ox * stride - pad + k)
                        if 0 <= y < h and 0 <= xx < w
                    ]
                    if not cells:
                        continue
                    out[bi, ci, oy, ox] = max(cells) if kind == "max" else sum(cells) / len(cells)
    return out
