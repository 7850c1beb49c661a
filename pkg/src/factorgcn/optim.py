"""Adam optimizer with bias correction and decoupled weight decay."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .tensor import Tensor


class Adam:
    """Standard Adam update over a fixed list of parameter tensors.

    Weight decay is decoupled from the moment estimates: each step applies
    ``p -= lr * weight_decay * p`` in addition to the Adam direction, so a
    zero gradient with zero decay leaves the parameter untouched.
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 0.005,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        """Apply one update from the gradients currently stored on the params."""
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= self.lr * update

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.data)
