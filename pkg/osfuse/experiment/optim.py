"""Stochastic gradient descent with momentum and decoupled weight selection."""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from ..core.errors import ContractError
from ..core.tensor import Tensor


class SGD:
    """Heavy-ball SGD.

    Weight decay is added to the gradient of weight matrices only (tensors
    with two or more axes); biases, residual weights and log-rates are not
    decayed.
    """

    def __init__(self, params: Dict[str, Tensor], lr: float = 0.01, momentum: float = 0.937,
                 weight_decay: float = 5e-4):
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ContractError(f"momentum must be in [0, 1), got {momentum}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in params.items()}

    def decays(self, name: str) -> bool:
        return self.params[name].ndim >= 2

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> Optional[float]:
        """Apply one update; returns the global gradient norm."""
        total = 0.0
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            total += float(np.sum(grad * grad))
            if self.weight_decay and self.decays(name):
                grad = grad + self.weight_decay * p.data
            velocity = self.momentum * self._velocity[name] + grad
            self._velocity[name] = velocity
            p.data = p.data - self.lr * velocity
        return float(np.sqrt(total))
