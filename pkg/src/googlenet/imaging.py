"""Image resampling, the deterministic multi-crop evaluation protocol, and
the stochastic training-time patch sampler with photometric distortions.

Images are float32 (height, width, 3) arrays in [0, 1].  Resampling is
separable: a per-axis weight matrix is built with half-pixel-centered
coordinate mapping and applied as two matmuls, which makes every method
deterministic and exactly constant-preserving (all weight rows sum to 1).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

CROP_SIZE = 224
SCALES = (256, 288, 320, 352)
SQUARES = ("first", "center", "last")
SUBS = ("tl", "tr", "bl", "br", "center", "full")
METHODS = ("bilinear", "area", "nearest", "cubic")


@dataclass(frozen=True)
class CropSpec:
    """One deterministic test-time crop.

    scale: shorter-side target the image was resized to;
    square: position of the square along the long side (left/top = first);
    sub: which 224x224 region of the square ('full' = whole square resized);
    mirrored: horizontal flip applied last.
    """

    scale: int
    square: str
    sub: str
    mirrored: bool

    def filename(self):
        return f"{self.scale}_{self.square}_{self.sub}_{'m' if self.mirrored else 'o'}.ppm"


def _nearest_weights(n_in, n_out):
    w = np.zeros((n_out, n_in))
    src = np.floor((np.arange(n_out) + 0.5) * (n_in / n_out)).astype(int)
    w[np.arange(n_out), np.clip(src, 0, n_in - 1)] = 1.0
    return w


def _bilinear_weights(n_in, n_out):
    w = np.zeros((n_out, n_in))
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    i0 = np.floor(pos).astype(int)
    t = pos - i0
    for tap, weight in ((i0, 1.0 - t), (i0 + 1, t)):
        np.add.at(w, (np.arange(n_out), np.clip(tap, 0, n_in - 1)), weight)
    return w


def _cubic_weights(n_in, n_out):
    # Catmull-Rom spline; the four tap weights sum to 1 for every phase
    w = np.zeros((n_out, n_in))
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    i0 = np.floor(pos).astype(int)
    t = pos - i0
    taps = (
        (i0 - 1, 0.5 * (-t + 2 * t**2 - t**3)),
        (i0, 0.5 * (2 - 5 * t**2 + 3 * t**3)),
        (i0 + 1, 0.5 * (t + 4 * t**2 - 3 * t**3)),
        (i0 + 2, 0.5 * (-(t**2) + t**3)),
    )
    for tap, weight in taps:
        np.add.at(w, (np.arange(n_out), np.clip(tap, 0, n_in - 1)), weight)
    return w


def _area_weights(n_in, n_out):
    # each output pixel averages the exact source interval it covers
    w = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        lo, hi = o * scale, (o + 1) * scale
        for i in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            w[o, i] = (min(hi, i + 1) - max(lo, i)) / scale
    return w


_WEIGHT_BUILDERS = {
    "nearest": _nearest_weights,
    "bilinear": _bilinear_weights,
    "cubic": _cubic_weights,
    "area": _area_weights,
}


def resize(img, out_h, out_w, method="bilinear"):
    """Separable resampling with half-pixel-centered coordinates."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    if method not in _WEIGHT_BUILDERS:
        raise ValueError(f"unknown resampling method {method!r}")
    img = np.asarray(img)
    h, w = img.shape[:2]
    build = _WEIGHT_BUILDERS[method]
    rows = build(h, out_h)
    cols = build(w, out_w)
    tmp = np.tensordot(rows, img.astype(np.float64, copy=False), axes=(1, 0))
    out = np.tensordot(cols, tmp, axes=(1, 1)).transpose(1, 0, 2)
    return np.ascontiguousarray(out, dtype=np.float32)


def _resize_shorter_side(img, target):
    h, w = img.shape[:2]
    if h <= w:
        return resize(img, target, int(round(w * target / h)), "bilinear")
    return resize(img, int(round(h * target / w)), target, "bilinear")


def _square_offsets(long_extent, side):
    return {"first": 0, "center": (long_extent - side) // 2, "last": long_extent - side}


def _take_square(img, position):
    h, w = img.shape[:2]
    side = min(h, w)
    if h <= w:  # landscape or square: squares slide left/center/right
        off = _square_offsets(w, side)[position]
        return img[:, off : off + side]
    off = _square_offsets(h, side)[position]  # portrait: top/center/bottom
    return img[off : off + side]


def _take_sub(square, sub):
    side = square.shape[0]
    margin = side - CROP_SIZE
    if sub == "full":
        return resize(square, CROP_SIZE, CROP_SIZE, "bilinear")
    offsets = {
        "tl": (0, 0),
        "tr": (0, margin),
        "bl": (margin, 0),
        "br": (margin, margin),
        "center": (margin // 2, margin // 2),
    }
    y, x = offsets[sub]
    return square[y : y + CROP_SIZE, x : x + CROP_SIZE]


def enumerate_crops(img, mode="c144"):
    """The deterministic test-time crop set, in fixed lexicographic order
    (scale, square position, sub-crop, mirror).

    c144: 4 scales x 3 squares x 6 sub-crops x 2 mirrorings;
    c10:  the classic center-square corners+center set at scale 256;
    c1:   one center crop at scale 256.
    """
    if mode == "c144":
        scales, squares, subs, mirrors = SCALES, SQUARES, SUBS, (False, True)
    elif mode == "c10":
        scales, squares, subs, mirrors = (256,), ("center",), SUBS[:5], (False, True)
    elif mode == "c1":
        scales, squares, subs, mirrors = (256,), ("center",), ("center",), (False,)
    else:
        raise ValueError(f"crop mode must be c144/c10/c1, got {mode!r}")
    out = []
    for scale in scales:
        resized = _resize_shorter_side(img, scale)
        for square_pos in squares:
            square = _take_square(resized, square_pos)
            for sub in subs:
                crop = np.ascontiguousarray(_take_sub(square, sub))
                for mirrored in mirrors:
                    view = crop[:, ::-1] if mirrored else crop
                    out.append((CropSpec(scale, square_pos, sub, mirrored), np.ascontiguousarray(view)))
    return out


def draw_patch_box(h, w, rng, trace=None):
    """Patch geometry for training: area fraction ~ U(0.08, 1) and aspect
    ~ U(3/4, 4/3), redrawn up to 10 times while the patch exceeds the
    image, then the centered square as fallback.  Returns (y, x, ph, pw).

    ``trace``, if a list, receives one record per draw (for statistical
    tests of the sampler).
    """
    for _ in range(10):
        fraction = rng.uniform(0.08, 1.0)
        aspect = rng.uniform(0.75, 4.0 / 3.0)
        area = fraction * h * w
        pw = int(round(math.sqrt(area * aspect)))
        ph = int(round(math.sqrt(area / aspect)))
        ok = 1 <= ph <= h and 1 <= pw <= w
        if trace is not None:
            trace.append({"area_fraction": fraction, "aspect": aspect, "accepted": ok})
        if ok:
            y = int(rng.integers(0, h - ph + 1))
            x = int(rng.integers(0, w - pw + 1))
            return y, x, ph, pw
    side = min(h, w)
    return (h - side) // 2, (w - side) // 2, side, side


def sample_train_patch(img, rng, trace=None):
    """One training patch, resized to 224x224 with one of the four
    resampling methods drawn uniformly."""
    h, w = img.shape[:2]
    y, x, ph, pw = draw_patch_box(h, w, rng, trace)
    method = METHODS[int(rng.integers(0, len(METHODS)))]
    return resize(img[y : y + ph, x : x + pw], CROP_SIZE, CROP_SIZE, method)


def _luminance(img):
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def photometric_distort(img, rng, factors=None, order=None):
    """Multiplicative brightness/contrast/saturation jitter, each factor
    ~ U(0.75, 1.25), applied in random order, clamped to [0, 1]."""
    if factors is None:
        factors = rng.uniform(0.75, 1.25, size=3)
    if order is None:
        order = rng.permutation(3)
    out = np.asarray(img, dtype=np.float32)
    for which in order:
        f = np.float32(factors[which])
        if f == 1.0:
            continue
        if which == 0:  # brightness
            out = out * f
        elif which == 1:  # contrast about the image mean
            m = out.mean(dtype=np.float32)
            out = (out - m) * f + m
        else:  # saturation toward/away from luminance
            gray = _luminance(out)[..., None]
            out = gray + (out - gray) * f
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def mean_subtract(img, mean):
    """224x224 RGB image -> (1, 3, 224, 224) float32 tensor, mean removed
    per channel (R, G, B order)."""
    img = np.asarray(img)
    if img.shape != (CROP_SIZE, CROP_SIZE, 3):
        raise ShapeError(f"expected a {CROP_SIZE}x{CROP_SIZE}x3 image, got {img.shape}")
    mean = np.asarray(mean, dtype=np.float32).reshape(3)
    t = img.transpose(2, 0, 1).astype(np.float32) - mean[:, None, None]
    return np.ascontiguousarray(t[None])


def dataset_mean(images):
    """Per-channel mean pixel value over a list of images."""
    totals = np.zeros(3, dtype=np.float64)
    count = 0
    for img in images:
        totals += np.asarray(img, dtype=np.float64).reshape(-1, 3).sum(axis=0)
        count += img.shape[0] * img.shape[1]
    return (totals / count).astype(np.float32)
