"""Multi-crop / multi-model ensemble prediction and classification metrics.

Softmax outputs are pooled over (model, crop) pairs: the default averages
everything; the alternative takes the max over crops within each model and
then averages across models.  Crop pooling runs in the fixed enumeration
order and model contributions are summed in a canonical order independent
of the caller's list order, so predictions are bitwise reproducible and
permutation-invariant.
"""

from dataclasses import dataclass

import numpy as np

from . import graph as graph_mod
from . import imaging
from .errors import ShapeError

CROP_COUNTS = {"c1": 1, "c10": 10, "c144": 144}
POOLINGS = ("mean", "maxcrop")

# crops per forward batch; keeps full-size im2col buffers bounded
_CHUNK = 16


@dataclass(frozen=True)
class EnsembleConfig:
    model_paths: tuple
    crop_mode: str = "c144"
    pooling: str = "mean"
    classes: int = 1000

    def __post_init__(self):
        if not self.model_paths:
            raise ValueError("ensemble needs at least one model")
        if self.crop_mode not in CROP_COUNTS:
            raise ValueError(f"crop mode must be one of {sorted(CROP_COUNTS)}, got {self.crop_mode!r}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")

    @property
    def cost(self):
        """Forward passes per image: models x crops."""
        return len(self.model_paths) * CROP_COUNTS[self.crop_mode]


def _model_prediction(graph, params, crops, pooling, mean):
    acc = None
    for start in range(0, len(crops), _CHUNK):
        batch = np.concatenate(
            [imaging.mean_subtract(img, mean) for _, img in crops[start : start + _CHUNK]]
        )
        probs = graph_mod.forward(graph, params, batch, mode="infer")["main"]
        part = probs.sum(axis=0) if pooling == "mean" else probs.max(axis=0)
        if acc is None:
            acc = part
        else:
            acc = acc + part if pooling == "mean" else np.maximum(acc, part)
    return acc / np.float32(len(crops)) if pooling == "mean" else acc


def predict(models, image, crop_mode="c144", pooling="mean", mean=(0.0, 0.0, 0.0)):
    """Ensemble class distribution for one image.

    ``models`` is a list of (graph, params).  All models must agree on the
    class count.  Under mean pooling the result sums to 1.
    """
    classes = {g.infer_shapes()[g.outputs["main"]][0] for g, _ in models}
    if len(classes) != 1:
        raise ShapeError(f"models disagree on class count: {sorted(classes)}")
    crops = imaging.enumerate_crops(image, crop_mode)
    per_model = [_model_prediction(g, p, crops, pooling, mean) for g, p in models]
    # canonical summation order: sort contributions by content, not by the
    # caller's model order, so permutations cannot change a single bit
    per_model.sort(key=lambda a: a.tobytes())
    total = per_model[0].copy()
    for contribution in per_model[1:]:
        total += contribution
    return total / np.float32(len(per_model))


@dataclass(frozen=True)
class Metrics:
    top1_error: float
    top5_error: float
    n_examples: int


def topk_error(predictions, labels, k):
    """Fraction of examples whose label is outside the k best classes.
    Ties rank the lower class index first."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.ndim != 2 or len(predictions) == 0:
        raise ValueError("predictions must be a non-empty (n, classes) array")
    if labels.shape != (len(predictions),):
        raise ShapeError(f"labels shape {labels.shape} does not match {len(predictions)} predictions")
    order = np.argsort(-predictions, axis=1, kind="stable")
    hits = (order[:, :k] == labels[:, None]).any(axis=1)
    return float(1.0 - hits.mean())


def metrics(predictions, labels):
    return Metrics(
        top1_error=topk_error(predictions, labels, 1),
        top5_error=topk_error(predictions, labels, 5),
        n_examples=len(np.asarray(labels)),
    )
