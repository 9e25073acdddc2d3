"""SGD with classical momentum.

Update rule per parameter array, with velocity v starting at zero:

    v <- momentum * v - lr * g
    w <- w + v

Velocity is kept in float64 between steps; the parameter write rounds
back to the float32 at-rest representation, which keeps training
bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from .layers import PARAM_DTYPE
from .network import Network


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    lr_decay: float = 0.97  # multiplicative, applied once per epoch

    def __post_init__(self):
        # lr == 0 is legal: it turns the optimizer into a no-op, which the
        # training contract relies on for its sanity checks.
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epoch count must be >= 1")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must be in [0, 1)")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ConfigError("lr decay must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "lr_decay": self.lr_decay,
        }


class SgdState:
    """Per-parameter velocity buffers."""

    def __init__(self, net: Network):
        self.velocity = [np.zeros(p.shape, dtype=np.float64) for p in net.params()]


def sgd_step(net: Network, gradients: list[np.ndarray], lr: float, momentum: float,
             state: SgdState) -> None:
    params = net.params()
    if len(gradients) != len(params):
        raise ShapeError(f"expected {len(params)} gradient arrays, got {len(gradients)}")
    for w, g, v in zip(params, gradients, state.velocity):
        if g.shape != w.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {w.shape}")
        v *= momentum
        v -= lr * np.asarray(g, dtype=np.float64)
        w[...] = (w.astype(np.float64) + v).astype(PARAM_DTYPE)
