"""ADAM optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError


class Adam:
    """Standard ADAM; one shared step counter, moments per parameter.

    The update uses bias-corrected moments and the (sqrt(v_hat) + eps)
    denominator, so the very first step with gradient g moves by
    -lr * g / (|g| + eps).
    """

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        """Apply one update from the accumulated gradients, then clear them."""
        for p in self.params:
            if not np.isfinite(p.grad).all():
                raise TrainingDivergedError(
                    f"non-finite gradient in {p.name}")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / b1t
            v_hat = v / b2t
            p.value -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(
                p.value.dtype)
            p.zero_grad()
