from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wasserstein_lab.config import config
from wasserstein_lab.core import InvalidArgumentError


@dataclass
class AdamState:
    """
    Adam moments for a fixed list of parameter arrays, updated in place by `step`.

    Defaults come from the settings (lr 1e-4, betas (0.0, 0.9)).
    """
    lr: float = field(default_factory=lambda: config.adam_lr)
    beta1: float = field(default_factory=lambda: config.adam_beta1)
    beta2: float = field(default_factory=lambda: config.adam_beta2)
    eps_hat: float = field(default_factory=lambda: config.adam_eps)
    t: int = 0
    first: list[np.ndarray] = field(default_factory=list)
    second: list[np.ndarray] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Descend along `grads`; moments are created on the first call."""
        if len(params) != len(grads):
            raise InvalidArgumentError(f"{len(params)} parameters but {len(grads)} gradients")
        if not self.first:
            self.first = [np.zeros_like(p) for p in params]
            self.second = [np.zeros_like(p) for p in params]
        if [m.shape for m in self.first] != [p.shape for p in params]:
            raise InvalidArgumentError("parameter shapes changed between Adam steps")

        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.first, self.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps_hat)
