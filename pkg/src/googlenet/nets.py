"""Builders for the Inception module and the full 22-layer network.

Channel widths follow the published per-layer table verbatim; the mini
variant divides every width by a common divisor (clamped at 4) so the
exact topology can be exercised at desk scale.
"""

from dataclasses import dataclass

from .errors import FormatError
from .graph import GraphSpec, LayerSpec, Node

# (n1x1, n3x3reduce, n3x3, n5x5reduce, n5x5, pool_proj) per module
INCEPTION_CONFIGS = {
    "3a": (64, 96, 128, 16, 32, 32),
    "3b": (128, 128, 192, 32, 96, 64),
    "4a": (192, 96, 208, 16, 48, 64),
    "4b": (160, 112, 224, 24, 64, 64),
    "4c": (128, 128, 256, 24, 64, 64),
    "4d": (112, 144, 288, 32, 64, 64),
    "4e": (256, 160, 320, 32, 128, 128),
    "5a": (256, 160, 320, 32, 128, 128),
    "5b": (384, 192, 384, 48, 128, 128),
}

AUX_ATTACH_POINTS = ("inception_4a", "inception_4d")


@dataclass(frozen=True)
class InceptionConfig:
    """The six width parameters of one Inception module."""

    n1x1: int
    n3x3reduce: int
    n3x3: int
    n5x5reduce: int
    n5x5: int
    pool_proj: int

    @property
    def out_channels(self):
        return self.n1x1 + self.n3x3 + self.n5x5 + self.pool_proj

    def check(self, variant):
        used = (
            (self.n1x1, self.n3x3, self.n5x5)
            if variant == "naive"
            else (self.n1x1, self.n3x3reduce, self.n3x3, self.n5x5reduce, self.n5x5, self.pool_proj)
        )
        if min(used) < 1:
            raise ValueError(f"inception widths must be >= 1 for the {variant} variant, got {self}")

    def scaled(self, divisor, floor=4):
        """Every width divided by ``divisor``, clamped below at ``floor``."""
        if divisor < 1:
            raise ValueError(f"width divisor must be >= 1, got {divisor}")
        return InceptionConfig(*(max(floor, c // divisor) for c in
                                 (self.n1x1, self.n3x3reduce, self.n3x3, self.n5x5reduce, self.n5x5, self.pool_proj)))


class GraphBuilder:
    """Accumulates nodes in execution order; thin sugar over GraphSpec."""

    def __init__(self, in_channels, height, width, meta=None):
        self.nodes = [Node("input", LayerSpec("input", out_channels=in_channels, height=height, width=width))]
        self.outputs = {}
        self.meta = dict(meta or {})

    def add(self, name, spec, inputs, block=None):
        self.nodes.append(Node(name, spec, (inputs,) if isinstance(inputs, str) else tuple(inputs), block or name))
        return name

    def conv_relu(self, name, src, in_ch, out_ch, k, stride=1, pad=0, block=None):
        block = block or name
        self.add(name, LayerSpec("conv", in_channels=in_ch, out_channels=out_ch, k=k, stride=stride, pad=pad), src, block)
        return self.add(f"{name}.relu", LayerSpec("relu"), name, block)

    def build(self):
        return GraphSpec(self.nodes, self.outputs, self.meta)


def add_inception(builder, name, cfg, src, in_channels, variant="reduced"):
    """Append one Inception module; returns the concat node name (== name)."""
    cfg.check(variant)
    b1 = builder.conv_relu(f"{name}.1x1", src, in_channels, cfg.n1x1, 1, block=name)
    if variant == "reduced":
        r3 = builder.conv_relu(f"{name}.3x3_reduce", src, in_channels, cfg.n3x3reduce, 1, block=name)
        b2 = builder.conv_relu(f"{name}.3x3", r3, cfg.n3x3reduce, cfg.n3x3, 3, pad=1, block=name)
        r5 = builder.conv_relu(f"{name}.5x5_reduce", src, in_channels, cfg.n5x5reduce, 1, block=name)
        b3 = builder.conv_relu(f"{name}.5x5", r5, cfg.n5x5reduce, cfg.n5x5, 5, pad=2, block=name)
        pool = builder.add(f"{name}.pool", LayerSpec("maxpool", k=3, stride=1, pad=1, ceil_mode=False), src, name)
        b4 = builder.conv_relu(f"{name}.pool_proj", pool, in_channels, cfg.pool_proj, 1, block=name)
    elif variant == "naive":
        b2 = builder.conv_relu(f"{name}.3x3", src, in_channels, cfg.n3x3, 3, pad=1, block=name)
        b3 = builder.conv_relu(f"{name}.5x5", src, in_channels, cfg.n5x5, 5, pad=2, block=name)
        b4 = builder.add(f"{name}.pool", LayerSpec("maxpool", k=3, stride=1, pad=1, ceil_mode=False), src, name)
    else:
        raise ValueError(f"variant must be 'reduced' or 'naive', got {variant!r}")
    return builder.add(name, LayerSpec("concat"), [b1, b2, b3, b4], name)


def build_inception(cfg, in_shape, variant="reduced", name="inception"):
    """A standalone one-module graph fragment (input -> module -> main)."""
    c, h, w = in_shape
    builder = GraphBuilder(c, h, w)
    builder.outputs["main"] = add_inception(builder, name, cfg, "input", c, variant)
    return builder.build()


def add_aux_head(builder, name, src, in_channels, classes, proj_channels=128, fc_units=1024):
    """The training-only side classifier: avgpool 5x5/3, 1x1 proj + relu,
    fc + relu, dropout 70%, classifier, softmax."""
    builder.add(f"{name}.pool", LayerSpec("avgpool", k=5, stride=3, pad=0, ceil_mode=False), src, name)
    proj = builder.conv_relu(f"{name}.proj", f"{name}.pool", in_channels, proj_channels, 1, block=name)
    builder.add(f"{name}.fc", LayerSpec("linear", in_channels=16 * proj_channels, out_channels=fc_units), proj, name)
    builder.add(f"{name}.fc.relu", LayerSpec("relu"), f"{name}.fc", name)
    builder.add(f"{name}.dropout", LayerSpec("dropout", rate=0.7), f"{name}.fc.relu", name)
    builder.add(f"{name}.classifier", LayerSpec("linear", in_channels=fc_units, out_channels=classes), f"{name}.dropout", name)
    return builder.add(f"{name}.softmax", LayerSpec("softmax"), f"{name}.classifier", name)


def build_aux_head(in_shape, classes=1000):
    """Standalone aux-head fragment for a 14x14 feature map."""
    c, h, w = in_shape
    if (h, w) != (14, 14):
        raise FormatError(f"aux head expects a 14x14 feature map, got {h}x{w}")
    builder = GraphBuilder(c, h, w)
    builder.outputs["main"] = add_aux_head(builder, "aux", "input", c, classes)
    return builder.build()


def _width(count, divisor, floor=4):
    return max(floor, count // divisor)


def build_googlenet(with_aux=False, classes=1000, width_divisor=1):
    """The full 22-layer network of the per-layer table; aux heads attach
    after modules 4a and 4d when requested."""
    if width_divisor < 1:
        raise ValueError(f"width divisor must be >= 1, got {width_divisor}")
    d = width_divisor
    meta = {"classes": str(classes), "divisor": str(d), "aux": str(int(with_aux))}
    g = GraphBuilder(3, 224, 224, meta)

    last = g.conv_relu("conv1", "input", 3, _width(64, d), 7, stride=2, pad=3)
    last = g.add("maxpool1", LayerSpec("maxpool", k=3, stride=2, pad=0, ceil_mode=True), last)
    last = g.conv_relu("conv2.reduce", last, _width(64, d), _width(64, d), 1, block="conv2")
    last = g.conv_relu("conv2", last, _width(64, d), _width(192, d), 3, pad=1)
    last = g.add("maxpool2", LayerSpec("maxpool", k=3, stride=2, pad=0, ceil_mode=True), last)

    channels = _width(192, d)
    for tag, widths in INCEPTION_CONFIGS.items():
        cfg = InceptionConfig(*widths).scaled(d) if d > 1 else InceptionConfig(*widths)
        last = add_inception(g, f"inception_{tag}", cfg, last, channels)
        channels = cfg.out_channels
        if tag in ("3b", "4e"):
            pool = "maxpool3" if tag == "3b" else "maxpool4"
            last = g.add(pool, LayerSpec("maxpool", k=3, stride=2, pad=0, ceil_mode=True), last)

    last = g.add("avgpool", LayerSpec("avgpool", k=7, stride=1, pad=0, ceil_mode=False), last)
    last = g.add("dropout", LayerSpec("dropout", rate=0.4), last)
    last = g.add("linear", LayerSpec("linear", in_channels=channels, out_channels=classes), last)
    g.outputs["main"] = g.add("softmax", LayerSpec("softmax"), last)

    if with_aux:
        # aux heads go after all main nodes so parameter draw order for the
        # main path is identical with and without them
        widths = {a: _width_sum(INCEPTION_CONFIGS[a.split("_")[1]], d) for a in AUX_ATTACH_POINTS}
        for i, attach in enumerate(AUX_ATTACH_POINTS, 1):
            g.outputs[f"aux{i}"] = add_aux_head(
                g, f"aux{i}", attach, widths[attach], classes,
                proj_channels=_width(128, d), fc_units=_width(1024, d),
            )
    return g.build()


def _width_sum(widths, divisor):
    cfg = InceptionConfig(*widths)
    return (cfg.scaled(divisor) if divisor > 1 else cfg).out_channels


def build_googlenet_mini(width_divisor, classes, with_aux=True):
    """Desk-scale stand-in: identical connectivity, widths / divisor."""
    return build_googlenet(with_aux=with_aux, classes=classes, width_divisor=width_divisor)
