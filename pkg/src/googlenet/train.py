"""The training loop: batching, the loss stack (main + 0.3-weighted aux
heads), SGD with momentum under the stepwise schedule, Polyak averaging,
the line-oriented metrics log, and the run manifest.

Data enters as materialized (n, 3, 224, 224) float32 tensors plus integer
labels; helpers below build those from a PPM directory + labels CSV
(optionally re-sampling training patches every epoch) or synthesize a
fixture set.
"""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import backend
from . import graph as graph_mod
from . import imaging, ppm
from .errors import FormatError
from .optim import OptimizerState, lr_at, polyak_update, sgd_step

LOG_COLUMNS = ("step", "epoch", "lr", "main_loss", "aux1_loss", "aux2_loss", "total_loss")


@dataclass
class TrainConfig:
    base_lr: float
    epochs: int
    batch_size: int = 8
    seed: int = 0
    data_seed: int | None = None  # batch order / augmentation; defaults to seed
    aux_weight: float = 0.3
    polyak_start: int = 0
    momentum: float = 0.9
    dropout: bool = True  # train-mode dropout on the forward pass
    target_total_loss: float | None = None  # early stop on eval-mode loss
    eval_every: int = 50

    def resolved_data_seed(self):
        return self.seed if self.data_seed is None else self.data_seed


@dataclass
class TrainResult:
    params: dict
    state: OptimizerState
    log: list
    steps: int
    final_eval_loss: float | None = None
    reached_target_at: int | None = None

    @property
    def polyak_params(self):
        return self.state.polyak_avg


def evaluate_loss(graph, params, data, labels, aux_weight=0.3, batch_size=32):
    """Composite loss with dropout disabled and aux heads still attached."""
    tags = tuple(graph.outputs)
    aux_tags = [t for t in tags if t != "main"]
    total = 0.0
    for start in range(0, len(labels), batch_size):
        x = data[start : start + batch_size]
        y = labels[start : start + batch_size]
        outs = graph_mod.forward(graph, params, x, mode="infer", tags=tags)
        batch_total = _nll(outs["main"], y) + aux_weight * sum(_nll(outs[t], y) for t in aux_tags)
        total += batch_total * len(y)
    return total / len(labels)


def _nll(probs, labels):
    return float(-np.log(probs[np.arange(len(labels)), labels]).mean())


def train(graph, data, labels, cfg, log_path=None, manifest_path=None):
    """Run the full recipe; returns updated parameters, optimizer state
    (including the Polyak average), and the per-step metrics log."""
    data = np.ascontiguousarray(data, dtype=np.float32)
    labels = np.asarray(labels)
    if len(data) != len(labels):
        raise FormatError(f"{len(data)} examples but {len(labels)} labels")
    dropout_rng = np.random.default_rng(cfg.seed)
    data_rng = np.random.default_rng(cfg.resolved_data_seed())
    params = graph_mod.init_params(graph, cfg.seed)
    state = OptimizerState(base_lr=cfg.base_lr, momentum=cfg.momentum)
    aux_tags = [t for t in graph.outputs if t != "main"]
    mode = "train" if cfg.dropout else "infer"
    if manifest_path:
        write_manifest(manifest_path, graph, cfg)

    log_fh = open(log_path, "w", newline="") if log_path else None
    writer = csv.writer(log_fh) if log_fh else None
    if writer:
        writer.writerow(LOG_COLUMNS)
    log = []
    step = 0
    result = TrainResult(params=params, state=state, log=log, steps=0)
    try:
        for epoch in range(cfg.epochs):
            state.epoch = epoch
            order = data_rng.permutation(len(labels))
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                tape = ag.Tape()
                variables = ag.wrap_params(params)
                outs = graph_mod.forward(
                    graph, variables, data[idx], mode=mode, rng=dropout_rng,
                    tags=tuple(graph.outputs), tape=tape,
                )
                main_loss = ag.cross_entropy(tape, outs["main"], labels[idx])
                aux_losses = [ag.cross_entropy(tape, outs[t], labels[idx]) for t in aux_tags]
                total = ag.composite_loss(tape, main_loss, aux_losses, cfg.aux_weight)
                tape.backward(total)
                sgd_step(params, ag.collect_grads(variables), state)
                if step >= cfg.polyak_start:
                    polyak_update(state, params)

                row = {
                    "step": step,
                    "epoch": epoch,
                    "lr": lr_at(epoch, cfg.base_lr),
                    "main_loss": float(main_loss.data),
                    "aux1_loss": float(aux_losses[0].data) if aux_losses else None,
                    "aux2_loss": float(aux_losses[1].data) if len(aux_losses) > 1 else None,
                    "total_loss": float(total.data),
                }
                log.append(row)
                if writer:
                    writer.writerow(
                        ["" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c]
                         for c in LOG_COLUMNS]
                    )
                step += 1
                result.steps = step

                if cfg.target_total_loss is not None and step % cfg.eval_every == 0:
                    loss = evaluate_loss(graph, params, data, labels, cfg.aux_weight)
                    result.final_eval_loss = loss
                    if loss < cfg.target_total_loss:
                        result.reached_target_at = step
                        return result
    finally:
        if log_fh:
            log_fh.close()
    if cfg.target_total_loss is not None:
        result.final_eval_loss = evaluate_loss(graph, params, data, labels, cfg.aux_weight)
        if result.reached_target_at is None and result.final_eval_loss < cfg.target_total_loss:
            result.reached_target_at = step
    return result


def write_manifest(path, graph, cfg):
    """Everything needed to reproduce a run, as key: value lines."""
    lines = {
        "seed": cfg.seed,
        "data_seed": cfg.resolved_data_seed(),
        "init": "uniform(+-sqrt(6/fan_in)) weights, zero biases, drawn in node order",
        "base_lr": cfg.base_lr,
        "momentum": cfg.momentum,
        "lr_schedule": "x0.96 every 8 epochs",
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "aux_weight": cfg.aux_weight,
        "polyak_start": cfg.polyak_start,
        "dropout": cfg.dropout,
        "kernel_backend": backend.name,
        "graph_meta": " ".join(f"{k}={v}" for k, v in sorted(graph.meta.items())) or "-",
        "parameterized_depth": graph.param_depth(),
        "building_blocks": len(graph.nodes),
    }
    with open(path, "w") as fh:
        for key, value in lines.items():
            fh.write(f"{key}: {value}\n")


def read_log(path):
    """Parse a metrics CSV back into row dicts (floats where applicable)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "step": int(row["step"]),
                    "epoch": int(row["epoch"]),
                    "lr": float(row["lr"]),
                    "main_loss": float(row["main_loss"]),
                    "aux1_loss": float(row["aux1_loss"]) if row["aux1_loss"] else None,
                    "aux2_loss": float(row["aux2_loss"]) if row["aux2_loss"] else None,
                    "total_loss": float(row["total_loss"]),
                }
            )
    return rows


def synthetic_dataset(n, classes, seed, grid=8):
    """A fixed synthetic fixture set: (n, 3, 224, 224) in [0, 1].

    Images are smooth low-frequency random fields (a coarse random grid
    upsampled bilinearly).  Pixel-level iid noise would be a degenerate
    fixture here: global average pooling collapses it to near-identical
    feature vectors across images, which makes even memorization
    ill-conditioned.  Low-frequency fields keep images globally distinct.
    """
    rng = np.random.default_rng(seed)
    coarse = rng.random((n, grid, grid, 3), dtype=np.float32)
    data = np.empty((n, 3, 224, 224), dtype=np.float32)
    for i in range(n):
        data[i] = imaging.resize(coarse[i], 224, 224, "bilinear").transpose(2, 0, 1)
    labels = rng.integers(0, classes, size=n)
    return data, labels


def load_labels_csv(path):
    """filename -> class index; tolerates an optional header row."""
    table = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise FormatError(f"{path}: label rows need (filename, class), got {row}")
            try:
                table[row[0].strip()] = int(row[1])
            except ValueError:
                if table:
                    raise FormatError(f"{path}: bad class index in {row}") from None
                continue  # header row
    if not table:
        raise FormatError(f"{path}: no labeled examples")
    return table


def load_ppm_dataset(data_dir, labels_csv):
    """Images (as float HWC arrays) plus labels for every file in the CSV."""
    table = load_labels_csv(labels_csv)
    images, labels = [], []
    for name in sorted(table):
        full = os.path.join(data_dir, name)
        if not os.path.exists(full):
            raise FormatError(f"labeled image {name!r} missing from {data_dir}")
        images.append(ppm.read_ppm(full))
        labels.append(table[name])
    return images, np.asarray(labels)


def prepare_tensors(images, mean, rng=None, augment=False):
    """Images -> (n, 3, 224, 224) training tensors.

    Deterministic path: center square, resized to 224, mean-subtracted.
    Augmented path: random patch sampling plus photometric distortion.
    """
    out = np.empty((len(images), 3, imaging.CROP_SIZE, imaging.CROP_SIZE), dtype=np.float32)
    for i, img in enumerate(images):
        if augment:
            patch = imaging.sample_train_patch(img, rng)
            patch = imaging.photometric_distort(patch, rng)
        else:
            h, w = img.shape[:2]
            side = min(h, w)
            y, x = (h - side) // 2, (w - side) // 2
            patch = imaging.resize(img[y : y + side, x : x + side], imaging.CROP_SIZE, imaging.CROP_SIZE)
        out[i] = imaging.mean_subtract(patch, mean)[0]
    return out


def epochs_for_steps(steps, n_examples, batch_size):
    """Smallest epoch count that yields at least `steps` optimizer steps."""
    per_epoch = math.ceil(n_examples / batch_size)
    return math.ceil(steps / per_epoch)
