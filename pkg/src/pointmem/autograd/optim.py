from __future__ import annotations

import numpy as np


class SGD:
    """Plain SGD with optional heavy-ball momentum; frozen parameters are skipped."""

    def __init__(self, params, lr: float, momentum: float = 0.0, clip_norm: float | None = None):
        self.params = [p for p in params if not p.frozen]
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self._velocity = [np.zeros_like(p.data) for p in self.params]

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float((p.grad**2).sum()) for p in self.params if p.grad is not None)))

    def step(self) -> None:
        scale = 1.0
        if self.clip_norm is not None:
            gn = self.grad_norm()
            if gn > self.clip_norm:
                scale = self.clip_norm / gn
        for p, v in zip(self.params, self._velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += scale * p.grad
            p.data = (p.data - self.lr * v).astype(p.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class Adam(SGD):
    """Adam with bias correction and decoupled weight decay; frozen parameters are skipped."""

    def __init__(
        self,
        params,
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        clip_norm: float | None = None,
    ):
        super().__init__(params, lr, 0.0, clip_norm)
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self._m = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self._v = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.t = 0

    def step(self) -> None:
        scale = 1.0
        if self.clip_norm is not None:
            gn = self.grad_norm()
            if gn > self.clip_norm:
                scale = self.clip_norm / gn
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1.0 - b1**self.t, 1.0 - b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = scale * p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            upd = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps) + self.lr * self.weight_decay * p.data
            p.data = (p.data - upd).astype(p.dtype, copy=False)
