"""Binary PPM (P6, 8-bit) reader/writer for image fixtures.

Images are float arrays shaped (height, width, 3) with values in [0, 1].
"""

import numpy as np

from .errors import FormatError


def _read_tokens(data, count):
    """First `count` whitespace-separated header tokens, honoring # comments.
    Returns (tokens, offset of the byte after the final separator)."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise FormatError("truncated PPM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if i >= len(data) or not data[i : i + 1].isspace():
        raise FormatError("PPM header must end with a whitespace byte")
    return tokens, i + 1


def read_ppm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _read_tokens(data, 4)
    if tokens[0] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise FormatError(f"{path}: bad PPM header") from e
    if not (1 <= maxval <= 255):
        raise FormatError(f"{path}: only 8-bit PPM supported (maxval {maxval})")
    need = w * h * 3
    raw = data[offset : offset + need]
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} pixel bytes, got {len(raw)}")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return (img / np.float32(maxval)).astype(np.float32)


def write_ppm(path, img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"image must be (h, w, 3), got {img.shape}")
    h, w = img.shape[:2]
    pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(pixels.tobytes())
