"""Declarative layer graphs: specs, shape inference, (de)serialization,
parameter initialization, and the forward executor.

A GraphSpec is an ordered DAG of primitive layers (the node list is a
topological order by construction).  Specs carry no weights; parameters
live in a flat dict keyed ``<node>.w`` / ``<node>.b`` so the same graph
can run with plain arrays (inference) or tape Vars (training).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import ops
from .errors import FormatError, ShapeError

KINDS = ("input", "conv", "maxpool", "avgpool", "relu", "dropout", "linear", "softmax", "concat")

# geometry fields each kind must carry; everything else must stay unset
_FIELDS = {
    "input": ("out_channels", "height", "width"),
    "conv": ("in_channels", "out_channels", "k", "stride", "pad"),
    "maxpool": ("k", "stride", "pad", "ceil_mode"),
    "avgpool": ("k", "stride", "pad", "ceil_mode"),
    "relu": (),
    "dropout": ("rate",),
    "linear": ("in_channels", "out_channels"),
    "softmax": (),
    "concat": (),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int | None = None
    out_channels: int | None = None
    k: int | None = None
    stride: int | None = None
    pad: int | None = None
    ceil_mode: bool | None = None
    rate: float | None = None
    height: int | None = None
    width: int | None = None

    def __post_init__(self):
        if self.kind not in _FIELDS:
            raise FormatError(f"unknown layer kind {self.kind!r}")
        required = _FIELDS[self.kind]
        for name in ("in_channels", "out_channels", "k", "stride", "pad", "ceil_mode", "rate", "height", "width"):
            value = getattr(self, name)
            if name in required and value is None:
                raise FormatError(f"{self.kind} layer needs field {name!r}")
            if name not in required and value is not None:
                raise FormatError(f"{self.kind} layer must not set field {name!r}")


@dataclass(frozen=True)
class Node:
    name: str
    spec: LayerSpec
    inputs: tuple = ()
    block: str = ""

    def __post_init__(self):
        if not self.block:
            object.__setattr__(self, "block", self.name)
        if self.spec.kind == "input" and self.inputs:
            raise FormatError(f"input node {self.name!r} cannot have inputs")
        if self.spec.kind != "input" and not self.inputs:
            raise FormatError(f"node {self.name!r} needs at least one input")
        if self.spec.kind not in ("input", "concat") and len(self.inputs) > 1:
            raise FormatError(f"node {self.name!r} ({self.spec.kind}) takes exactly one input")


@dataclass
class GraphSpec:
    nodes: list
    outputs: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for node in self.nodes:
            if node.name in seen:
                raise FormatError(f"duplicate node name {node.name!r}")
            for src in node.inputs:
                if src not in seen:
                    raise FormatError(f"node {node.name!r} consumes {src!r} before it is defined")
            seen.add(node.name)
        if not self.nodes or self.nodes[0].spec.kind != "input":
            raise FormatError("graph must start with an input node")
        if sum(n.spec.kind == "input" for n in self.nodes) != 1:
            raise FormatError("graph must have exactly one input node")
        if "main" not in self.outputs:
            raise FormatError("graph needs a 'main' output")
        for tag, name in self.outputs.items():
            if tag not in ("main", "aux1", "aux2"):
                raise FormatError(f"unknown output tag {tag!r}")
            if name not in seen:
                raise FormatError(f"output {tag} points at unknown node {name!r}")

    def node(self, name):
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def input_shape(self):
        s = self.nodes[0].spec
        return (s.out_channels, s.height, s.width)

    def blocks(self):
        """Block labels in first-appearance order."""
        out = []
        for n in self.nodes:
            if n.block not in out:
                out.append(n.block)
        return out

    def needed_for(self, tags):
        """Names of nodes reachable backwards from the given output tags."""
        want = {self.outputs[t] for t in tags}
        for node in reversed(self.nodes):
            if node.name in want:
                want.update(node.inputs)
        return want

    def infer_shapes(self):
        """Per-node (channels, height, width); raises on any inconsistency."""
        shapes = {}
        for node in self.nodes:
            s = node.spec
            try:
                shapes[node.name] = self._node_shape(s, [shapes[i] for i in node.inputs])
            except (ShapeError, ValueError) as e:
                raise type(e)(f"{node.name}: {e}") from e
        return shapes

    @staticmethod
    def _node_shape(s, in_shapes):
        if s.kind == "input":
            return (s.out_channels, s.height, s.width)
        c, h, w = in_shapes[0]
        if s.kind == "conv":
            if c != s.in_channels:
                raise ShapeError(f"expects {s.in_channels} channels, gets {c}")
            oh, ow = ops.conv_geometry((1, c, h, w), (s.out_channels, c, s.k, s.k), s.stride, s.pad)
            return (s.out_channels, oh, ow)
        if s.kind in ("maxpool", "avgpool"):
            oh = ops.pool_output_extent(h, s.k, s.stride, s.pad, s.ceil_mode)
            ow = ops.pool_output_extent(w, s.k, s.stride, s.pad, s.ceil_mode)
            return (c, oh, ow)
        if s.kind == "linear":
            if c * h * w != s.in_channels:
                raise ShapeError(f"expects {s.in_channels} features, gets {c}x{h}x{w}={c * h * w}")
            return (s.out_channels, 1, 1)
        if s.kind == "concat":
            for i, (_, hi, wi) in enumerate(in_shapes):
                if (hi, wi) != (h, w):
                    raise ShapeError(f"branch {i} is {hi}x{wi}, branch 0 is {h}x{w}")
            return (sum(ci for ci, _, _ in in_shapes), h, w)
        return (c, h, w)  # relu, dropout, softmax

    def param_shapes(self):
        shapes = {}
        for node in self.nodes:
            s = node.spec
            if s.kind == "conv":
                shapes[f"{node.name}.w"] = (s.out_channels, s.in_channels, s.k, s.k)
                shapes[f"{node.name}.b"] = (s.out_channels,)
            elif s.kind == "linear":
                shapes[f"{node.name}.w"] = (s.out_channels, s.in_channels)
                shapes[f"{node.name}.b"] = (s.out_channels,)
        return shapes

    def param_depth(self, tag="main"):
        """Longest chain of parameterized layers from input to an output."""
        depth = {}
        for node in self.nodes:
            own = 1 if node.spec.kind in ("conv", "linear") else 0
            depth[node.name] = own + max((depth[i] for i in node.inputs), default=0)
        return depth[self.outputs[tag]]


def serialize(graph):
    """Human-readable one-line-per-layer text; round-trips through parse()."""
    lines = []
    head = " ".join(f"{tag}={name}" for tag, name in sorted(graph.outputs.items()))
    meta = " ".join(f"{k}={v}" for k, v in sorted(graph.meta.items()))
    lines.append(("graph " + head + (" " + meta if meta else "")).rstrip())
    for node in graph.nodes:
        s = node.spec
        parts = [f"node {node.name} {s.kind}"]
        if node.block != node.name:
            parts.append(f"block={node.block}")
        if s.kind == "input":
            parts.append(f"channels={s.out_channels} height={s.height} width={s.width}")
        elif s.kind == "conv":
            parts.append(f"in={s.in_channels} out={s.out_channels} k={s.k} stride={s.stride} pad={s.pad}")
        elif s.kind in ("maxpool", "avgpool"):
            parts.append(f"k={s.k} stride={s.stride} pad={s.pad} ceil={int(s.ceil_mode)}")
        elif s.kind == "dropout":
            parts.append(f"rate={s.rate!r}")
        elif s.kind == "linear":
            parts.append(f"in={s.in_channels} out={s.out_channels}")
        if node.inputs:
            parts.append("<- " + " ".join(node.inputs))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse(text):
    """Inverse of serialize()."""
    nodes, outputs, meta = [], {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("graph"):
                for token in line.split()[1:]:
                    key, value = token.split("=", 1)
                    if key in ("main", "aux1", "aux2"):
                        outputs[key] = value
                    else:
                        meta[key] = value
                continue
            if not line.startswith("node "):
                raise FormatError(f"expected 'node' or 'graph', got {line.split()[0]!r}")
            body, _, srcs = line[5:].partition("<-")
            tokens = body.split()
            name, kind = tokens[0], tokens[1]
            kv = dict(t.split("=", 1) for t in tokens[2:])
            block = kv.pop("block", name)
            spec = _spec_from_tokens(kind, kv)
            nodes.append(Node(name, spec, tuple(srcs.split()), block))
        except FormatError:
            raise
        except Exception as e:
            raise FormatError(f"line {lineno}: cannot parse {raw!r} ({e})") from e
    return GraphSpec(nodes, outputs, meta)


def _spec_from_tokens(kind, kv):
    def geti(key):
        return int(kv.pop(key))

    if kind == "input":
        spec = LayerSpec("input", out_channels=geti("channels"), height=geti("height"), width=geti("width"))
    elif kind == "conv":
        spec = LayerSpec("conv", in_channels=geti("in"), out_channels=geti("out"),
                         k=geti("k"), stride=geti("stride"), pad=geti("pad"))
    elif kind in ("maxpool", "avgpool"):
        spec = LayerSpec(kind, k=geti("k"), stride=geti("stride"), pad=geti("pad"),
                         ceil_mode=bool(geti("ceil")))
    elif kind == "dropout":
        spec = LayerSpec("dropout", rate=float(kv.pop("rate")))
    elif kind == "linear":
        spec = LayerSpec("linear", in_channels=geti("in"), out_channels=geti("out"))
    else:
        spec = LayerSpec(kind)
    if kv:
        raise FormatError(f"unexpected fields {sorted(kv)} on {kind} layer")
    return spec


def init_params(graph, seed, dtype=np.float32):
    """Fan-in scaled uniform init with the relu gain: weights are drawn
    uniform with bounds +-sqrt(6/fan_in) (variance 2/fan_in), biases zero.
    The gain of 2 is what actually keeps activation variance level through
    a 22-layer rectified stack; without it the top-of-network signal decays
    by ~30x and training stalls.

    Draws happen in node order from one seeded generator, so two graphs
    sharing a node prefix get bitwise-identical parameters for it.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for node in graph.nodes:
        s = node.spec
        if s.kind == "conv":
            fan_in = s.in_channels * s.k * s.k
            shape = (s.out_channels, s.in_channels, s.k, s.k)
        elif s.kind == "linear":
            fan_in = s.in_channels
            shape = (s.out_channels, s.in_channels)
        else:
            continue
        bound = math.sqrt(6.0 / fan_in)
        params[f"{node.name}.w"] = rng.uniform(-bound, bound, shape).astype(dtype)
        params[f"{node.name}.b"] = np.zeros(s.out_channels, dtype)
    return params


def check_params(graph, params):
    """Verify the param dict matches the graph's expected names/shapes."""
    expected = graph.param_shapes()
    for name, shape in expected.items():
        if name not in params:
            raise ShapeError(f"missing parameter {name!r}")
        if tuple(params[name].shape) != shape:
            raise ShapeError(f"parameter {name!r} has shape {tuple(params[name].shape)}, expected {shape}")
    extra = set(params) - set(expected)
    if extra:
        raise ShapeError(f"parameters not used by the graph: {sorted(extra)}")


def forward(graph, params, x, mode="infer", rng=None, tags=None, tape=None):
    """Execute the graph on a batch.

    infer mode prunes everything not needed for the requested outputs
    (auxiliary heads in particular) and runs dropout as the identity.
    Returns {tag: (batch, classes) array} -- or Vars when a tape is given.
    Per-layer failures are re-raised with the layer name attached.
    """
    if tags is None:
        tags = tuple(graph.outputs) if mode == "train" else ("main",)
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1:] != graph.input_shape:
        raise ShapeError(
            f"input shape {x.shape} does not match graph input (batch, {graph.input_shape})"
        )
    needed = graph.needed_for(tags)
    use_tape = tape is not None
    acts = {}
    for node in graph.nodes:
        if node.name not in needed:
            continue
        try:
            acts[node.name] = _eval_node(node, acts, params, x, mode, rng, tape, use_tape)
        except (ShapeError, ValueError) as e:
            if str(e).startswith(f"{node.name}:"):
                raise
            raise type(e)(f"{node.name}: {e}") from e
    return {tag: acts[graph.outputs[tag]] for tag in tags}


def _eval_node(node, acts, params, x, mode, rng, tape, use_tape):
    s = node.spec
    ins = [acts[i] for i in node.inputs]
    if s.kind == "input":
        return ag.Var(x) if use_tape else x
    if s.kind == "conv":
        w, b = params[f"{node.name}.w"], params[f"{node.name}.b"]
        if use_tape:
            return ag.conv2d(tape, ins[0], w, b, stride=s.stride, pad=s.pad)
        return ops.conv2d(ins[0], w, b, stride=s.stride, pad=s.pad)
    if s.kind in ("maxpool", "avgpool"):
        kind = s.kind[:3]
        if use_tape:
            return ag.pool2d(tape, ins[0], kind, s.k, s.stride, pad=s.pad, ceil_mode=s.ceil_mode)
        return ops.pool2d(ins[0], kind, s.k, s.stride, pad=s.pad, ceil_mode=s.ceil_mode)
    if s.kind == "relu":
        return ag.relu(tape, ins[0]) if use_tape else ops.relu(ins[0])
    if s.kind == "dropout":
        if use_tape:
            return ag.dropout(tape, ins[0], s.rate, mode, rng)
        return ops.dropout(ins[0], s.rate, mode, rng)
    if s.kind == "linear":
        w, b = params[f"{node.name}.w"], params[f"{node.name}.b"]
        if use_tape:
            flat = ins[0] if len(ins[0].data.shape) == 2 else ag.flatten(tape, ins[0])
            return ag.linear(tape, flat, w, b)
        flat = ins[0].reshape(ins[0].shape[0], -1)
        return ops.linear(flat, w, b)
    if s.kind == "softmax":
        if use_tape:
            flat = ins[0] if len(ins[0].data.shape) == 2 else ag.flatten(tape, ins[0])
            return ag.softmax(tape, flat)
        return ops.softmax(ins[0].reshape(ins[0].shape[0], -1))
    if s.kind == "concat":
        return ag.concat_channels(tape, ins) if use_tape else ops.concat_channels(ins)
    raise FormatError(f"unknown layer kind {s.kind!r}")
