"""Model container files.

Layout (all little-endian):

    magic    4 bytes  b"INCM"
    version  u32      1
    glen     u32      byte length of the graph description text
    graph    glen bytes, utf-8 (see graph.serialize)
    nparams  u32
    then per parameter, in sorted name order:
      nlen u16, name utf-8, ndim u8, ndim * u32 dims, fp32 data

Parameters are stored fp32; load(save(x)) is bitwise for fp32 params.
"""

import struct
import warnings

import numpy as np

from . import graph as graph_mod
from .errors import FormatError, ShapeError

MAGIC = b"INCM"
VERSION = 1


def save_model(path, graph, params):
    graph_mod.check_params(graph, params)
    text = graph_mod.serialize(graph).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", MAGIC, VERSION, len(text)))
        fh.write(text)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f4")
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def _read_exact(fh, n, path, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated while reading {what}")
    return data


def load_model(path):
    """Returns (graph, params) exactly as saved."""
    with open(path, "rb") as fh:
        magic, version, glen = struct.unpack("<4sII", _read_exact(fh, 12, path, "header"))
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        graph = graph_mod.parse(_read_exact(fh, glen, path, "graph text").decode())
        (nparams,) = struct.unpack("<I", _read_exact(fh, 4, path, "parameter count"))
        params = {}
        for _ in range(nparams):
            (nlen,) = struct.unpack("<H", _read_exact(fh, 2, path, "name length"))
            name = _read_exact(fh, nlen, path, "name").decode()
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, "rank"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, path, "shape"))
            n = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 4 * n, path, f"data of {name}")
            params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    graph_mod.check_params(graph, params)
    return graph, params


def adapt_params(graph, params):
    """Fit a parameter dict onto a (possibly aux-free) target graph.

    Auxiliary-head parameters with no home in the target are dropped with
    a warning; any other mismatch is an error.
    """
    expected = graph.param_shapes()
    kept, dropped = {}, []
    for name, arr in params.items():
        if name in expected:
            kept[name] = arr
        elif name.startswith("aux"):
            dropped.append(name)
        else:
            raise ShapeError(f"parameter {name!r} does not belong to the target graph")
    if dropped:
        warnings.warn(f"dropping {len(dropped)} auxiliary-head parameters not in the target graph")
    graph_mod.check_params(graph, kept)
    return kept
