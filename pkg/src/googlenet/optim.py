"""The optimization recipe: SGD with 0.9 momentum, the stepwise learning
rate decay (x0.96 every 8 epochs), and Polyak parameter averaging."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


def lr_at(epoch, base_lr):
    """Learning rate after the fixed schedule: 4% off every 8 epochs."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return base_lr * 0.96 ** (epoch // 8)


@dataclass
class OptimizerState:
    """Momentum buffers, schedule position, and the Polyak running mean.

    ``velocities`` and ``polyak_avg`` are keyed like the parameter dict and
    created lazily (zero buffers on first step, per the momentum contract).
    """

    base_lr: float
    momentum: float = 0.9
    epoch: int = 0
    velocities: dict = field(default_factory=dict)
    polyak_avg: dict | None = None
    polyak_count: int = 0


def sgd_step(params, grads, state):
    """Heavy-ball update in place: v <- momentum*v + g; p <- p - lr*v."""
    lr = lr_at(state.epoch, state.base_lr)
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        v = state.velocities.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.velocities[name] = v
        v *= state.momentum
        v += g
        p -= p.dtype.type(lr) * v
    return params, state


def polyak_update(state, params):
    """Fold the current parameters into the running arithmetic mean."""
    if state.polyak_avg is None:
        state.polyak_avg = {name: np.zeros_like(p) for name, p in params.items()}
    n = state.polyak_count + 1
    for name, p in params.items():
        avg = state.polyak_avg[name]
        avg += (p - avg) / p.dtype.type(n)
    state.polyak_count = n
    return state
