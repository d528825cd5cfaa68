"""Central finite-difference check of autodiff gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def numerical_gradient(f: Callable[..., Tensor], inputs: Sequence[Tensor], index: int, eps: float) -> np.ndarray:
    x = inputs[index]
    grad = np.zeros_like(x.data, dtype=np.float64)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(*inputs).data)
        flat[i] = orig - eps
        fm = float(f(*inputs).data)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def finite_diff_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-4,
    coords: dict[int, np.ndarray] | None = None,
    floor: float = 1e-6,
) -> float:
    """Max relative error between autodiff and central differences.

    ``f`` maps the input tensors to a scalar tensor. Inputs are promoted to
    float64 in place before the check. The error per element is
    ``|g_ad - g_fd| / max(|g_ad|, |g_fd|, floor)``; the floor keeps
    gradients that are exactly zero (a key bias under softmax, say) from
    dividing difference-quotient roundoff by nothing. ``coords`` optionally restricts
    input ``i`` to a subset of flat element indices, which keeps checks on
    large parameter sets tractable. Never raises on a mismatch; callers
    compare the returned value against their tolerance.
    """
    for t in inputs:
        t.data = np.array(t.data, dtype=np.float64, order="C")
        t.grad = None
    out = f(*inputs)
    backward(out)
    worst = 0.0
    for idx, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        g_ad = np.zeros(t.shape) if t.grad is None else t.grad.reshape(t.shape)
        flat = t.data.reshape(-1)
        sel = np.arange(flat.size) if coords is None or idx not in coords else np.asarray(coords[idx])
        for i in sel:
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f(*inputs).data)
            flat[i] = orig - eps
            fm = float(f(*inputs).data)
            flat[i] = orig
            g_fd = (fp - fm) / (2 * eps)
            a = g_ad.reshape(-1)[i]
            err = abs(a - g_fd) / max(abs(a), abs(g_fd), floor)
            worst = max(worst, err)
    return worst
