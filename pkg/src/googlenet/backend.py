"""Kernel backend selection.

The compiled extension (``googlenet._kernels``) is preferred when it was
built; otherwise the pure-numpy fallback takes over.  Set the environment
variable ``GOOGLENET_KERNELS`` to ``cython`` or ``numpy`` to force one
(``cython`` raises if the extension is missing), or leave it at ``auto``.
"""

import os

from . import kernels_py

try:
    from . import _kernels as _cython
except ImportError:
    _cython = None


def available():
    """Names of the usable backends."""
    return ("numpy", "cython") if _cython is not None else ("numpy",)


def get(name):
    """Return the kernel module for ``name`` ('numpy' or 'cython')."""
    if name == "numpy":
        return kernels_py
    if name == "cython":
        if _cython is None:
            raise RuntimeError("compiled kernel extension is not built")
        return _cython
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    choice = os.environ.get("GOOGLENET_KERNELS", "auto")
    if choice == "auto":
        return _cython if _cython is not None else kernels_py
    return get(choice)


kernels = _select()
name = "cython" if kernels is _cython else "numpy"
