"""From-scratch GoogLeNet/Inception engine.

NCHW compute kernels (compiled core with a pure-numpy fallback), tape
reverse-mode differentiation, the published training recipe, the 144-crop
evaluation protocol, and a static parameter/multiply-add auditor.
"""

__version__ = "0.1.0"

from .graph import GraphSpec, LayerSpec, Node, forward, init_params, parse, serialize
from .nets import InceptionConfig, build_aux_head, build_googlenet, build_googlenet_mini, build_inception

__all__ = [
    "GraphSpec",
    "LayerSpec",
    "Node",
    "InceptionConfig",
    "build_aux_head",
    "build_googlenet",
    "build_googlenet_mini",
    "build_inception",
    "forward",
    "init_params",
    "parse",
    "serialize",
    "__version__",
]
