"""SGD with momentum and per-layer freezing."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class SGDConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    iterations: int = 1000
    fixed_layers: int = 0  # freeze the first F conv layers of the backbone
    seed: int = 0
    lr_decay: float = 1.0  # multiplicative step decay, 1.0 = constant rate
    lr_decay_every: int = 0  # iterations between decays, 0 = never

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must be in [0, 1)")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.fixed_layers < 0:
            raise ConfigError("fixed_layers must be non-negative")

    def rate_at(self, iteration):
        if self.lr_decay_every <= 0 or self.lr_decay == 1.0:
            return self.learning_rate
        return self.learning_rate * self.lr_decay ** (iteration // self.lr_decay_every)


def init_velocity(params):
    """Zero velocity buffers matching a parameter tree."""
    return {key: {name: np.zeros_like(arr) for name, arr in group.items()}
            for key, group in params.items()}


def sgd_step(params, grads, velocity, learning_rate, momentum, frozen_keys=()):
    """In-place update: v <- mu v - eta g; w <- w + v. Frozen keys untouched."""
    frozen = set(frozen_keys)
    for key, group in params.items():
        if key in frozen:
            continue
        g = grads.get(key)
        if g is None:
            continue
        for name, arr in group.items():
            if g[name].shape != arr.shape:
                raise ConfigError(
                    f"gradient shape {g[name].shape} does not match parameter "
                    f"{key}.{name} of shape {arr.shape}"
                )
            v = velocity[key][name]
            v *= momentum
            v -= learning_rate * g[name].astype(arr.dtype)
            arr += v
