"""Differentiable operations over :class:`Tensor`.

The set is closed over what the reconstruction model and its losses use:
elementwise arithmetic, matmul, reductions, shape manipulation, indexing,
layer norm, softmax, GELU, scaled dot-product attention, 2D rotary
embeddings, and the norm / log-map composites of the loss.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, EmptyMemoryError
from .tensor import Tensor, is_grad_enabled, make_result


def as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x, dtype=dtype)


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ----------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data

    def bw(g):
        ga = unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(a)), computed stably."""
    x = a.data
    out = np.logaddexp(0.0, x).astype(x.dtype)
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    return make_result(out, (a,), lambda g: (g * sig,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * x * (1.0 + 0.044715 * x2))
    out = 0.5 * x * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return make_result(out, (a,), bw)


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}") from exc

    def bw(g):
        ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(out, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x`` (weight is [in, out])."""
    lead = x.shape[:-1]
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear shape mismatch: {x.shape} @ {weight.shape}")
    x2 = x.data.reshape(-1, x.shape[-1])
    out = x2 @ weight.data
    if bias is not None:
        out = out + bias.data
    out = out.reshape(lead + (weight.shape[1],))
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g2 = g.reshape(-1, weight.shape[1])
        gx = (g2 @ weight.data.T).reshape(x.shape) if x.requires_grad else None
        gw = x2.T @ g2 if weight.requires_grad else None
        if bias is None:
            return gx, gw
        gb = g2.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return make_result(out, parents, bw)


# ----------------------------------------------------------------------------
# reductions


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out, dtype=a.dtype), (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ----------------------------------------------------------------------------
# shape and indexing


def reshape(a: Tensor, shape) -> Tensor:
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return make_result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    return make_result(np.swapaxes(a.data, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return make_result(
        np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (unbroadcast(g, a.shape),)
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis`` (the token axis in the model)."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat of an empty sequence")
    if len(tensors) == 1:
        return tensors[0]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(out, tensors, bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)
    n = len(tensors)

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return make_result(out, tensors, bw)


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a: Tensor, idx) -> Tensor:
    out = a.data[idx]
    if not isinstance(out, np.ndarray):
        out = np.asarray(out, dtype=a.dtype)
    basic = _is_basic_index(idx)

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return make_result(np.array(out, order="C"), (a,), bw)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate gradient."""
    indices = np.asarray(indices, dtype=np.intp)
    out = np.take(a.data, indices, axis=axis)
    axis_n = axis % a.ndim
    flat = indices.reshape(-1) % max(a.shape[axis_n], 1) if indices.size else indices.reshape(-1)
    unique = np.unique(flat).size == flat.size

    def bw(g):
        full = np.zeros_like(a.data)
        moved = np.moveaxis(full, axis_n, 0)
        g_moved = np.moveaxis(g, list(range(axis_n, axis_n + indices.ndim)), list(range(indices.ndim)))
        if unique:
            moved[indices] = g_moved
        else:
            np.add.at(moved, indices, g_moved)
        return (full,)

    return make_result(out, (a,), bw)


# ----------------------------------------------------------------------------
# normalisation and activations


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if d == 0:
        raise DimensionError("layer_norm over an empty last dimension")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def bw(g):
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = rstd * (
                gxhat
                - gxhat.mean(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            )
        gg = unbroadcast(g * xhat, gamma.shape) if gamma.requires_grad else None
        gb = unbroadcast(g, beta.shape) if beta.requires_grad else None
        return gx, gg, gb

    return make_result(out.astype(xd.dtype, copy=False), (x, gamma, beta), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return make_result(p, (a,), bw)


# ----------------------------------------------------------------------------
# attention


def rope_rotate(x: Tensor, table) -> Tensor:
    """Apply a 2D axial rotary embedding (see :class:`RotaryTable`)."""
    cos, sin = table.cos.astype(x.dtype, copy=False), table.sin.astype(x.dtype, copy=False)
    if x.shape[-2] != cos.shape[0] or x.shape[-1] != cos.shape[1]:
        raise DimensionError(f"rotary table {cos.shape} does not match tokens {x.shape[-2:]}")
    out = x.data * cos + table.rotate(x.data) * sin
    return make_result(out, (x,), lambda g: (g * cos + table.rotate_transpose(g * sin),))


def attention(q: Tensor, k: Tensor, v: Tensor, rope=None) -> Tensor:
    """softmax(q kᵀ / sqrt(dh)) v over the last two axes, per head.

    Shapes are ``[..., h, L, dh]``; leading axes of ``k``/``v`` broadcast
    against ``q`` so one memory context can serve a batch of frames. When
    ``rope`` is given it is applied to both queries and keys, which is only
    meaningful when they share token positions (self-attention).
    """
    lk = k.shape[-2]
    if lk == 0:
        raise EmptyMemoryError("attention over an empty key set")
    if k.shape != v.shape:
        raise DimensionError(f"key/value shape mismatch: {k.shape} vs {v.shape}")
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query/key head dim mismatch: {q.shape} vs {k.shape}")
    if rope is not None:
        if q.shape[-1] % 2:
            raise DimensionError("rotary embedding needs an even head dimension")
        q = rope_rotate(q, rope)
        k = rope_rotate(k, rope)
    scale = 1.0 / math.sqrt(q.shape[-1])
    qd, kd, vd = q.data, k.data, v.data
    if not (is_grad_enabled() and (q.requires_grad or k.requires_grad or v.requires_grad)):
        return Tensor(_attention_inference(qd, kd, vd, scale), dtype=qd.dtype)
    s = np.matmul(qd, np.swapaxes(kd, -1, -2)) * scale
    s -= s.max(axis=-1, keepdims=True)
    p = np.exp(s)
    p /= p.sum(axis=-1, keepdims=True)
    out = np.matmul(p, vd)

    def bw(g):
        gv = unbroadcast(np.matmul(np.swapaxes(p, -1, -2), g), v.shape) if v.requires_grad else None
        gp = np.matmul(g, np.swapaxes(vd, -1, -2))
        gs = p * (gp - (gp * p).sum(axis=-1, keepdims=True)) * scale
        gq = np.matmul(gs, kd) if q.requires_grad else None
        gk = unbroadcast(np.matmul(np.swapaxes(gs, -1, -2), qd), k.shape) if k.requires_grad else None
        return gq, gk, gv

    return make_result(out, (q, k, v), bw)


ATTN_BLOCK_ELEMS = 1 << 20


def _attention_inference(qd: np.ndarray, kd: np.ndarray, vd: np.ndarray, scale: float) -> np.ndarray:
    """Forward-only attention with a bounded score buffer.

    Queries from every frame sharing one broadcast key set are stacked into
    a single matrix and processed in row blocks, so the cost per query row
    does not grow with how many frames are batched together.
    """
    lead_q, lead_k = qd.shape[:-3], kd.shape[:-3]
    if qd.ndim < 3 or any(d != 1 for d in lead_k):
        s = np.matmul(qd, np.swapaxes(kd, -1, -2)) * scale
        s -= s.max(axis=-1, keepdims=True)
        np.exp(s, out=s)
        s /= s.sum(axis=-1, keepdims=True)
        return np.matmul(s, vd)
    h, lq, dh = qd.shape[-3:]
    B = int(np.prod(lead_q)) if lead_q else 1
    kk = kd.reshape(kd.shape[-3:])
    vv = vd.reshape(vd.shape[-3:])
    rows = np.moveaxis(qd.reshape(B, h, lq, dh), 1, 0).reshape(h, B * lq, dh)
    out = np.empty((h, B * lq, vv.shape[-1]), dtype=np.result_type(qd, vd))
    kt = np.swapaxes(kk, -1, -2) * scale
    step = max(1, ATTN_BLOCK_ELEMS // (h * kk.shape[-2]))
    for a in range(0, B * lq, step):
        s = np.matmul(rows[:, a : a + step], kt)
        s -= s.max(axis=-1, keepdims=True)
        np.exp(s, out=s)
        s /= s.sum(axis=-1, keepdims=True)
        out[:, a : a + step] = np.matmul(s, vv)
    out = np.moveaxis(out.reshape(h, B, lq, -1), 0, 1)
    return np.ascontiguousarray(out.reshape(*lead_q, h, lq, -1))


# ----------------------------------------------------------------------------
# loss composites


def norm(a: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the subgradient at zero is taken as zero."""
    x = a.data
    r = np.sqrt((x * x).sum(axis=axis, keepdims=True))

    def bw(g):
        safe = np.where(r > 0, r, 1.0)
        return (np.where(r > 0, x / safe, 0.0) * np.expand_dims(g, axis),)

    return make_result(np.squeeze(r, axis=axis), (a,), bw)


def log_map(a: Tensor) -> Tensor:
    """x -> x / |x| * log(1 + |x|) over the last axis, with f(0) = 0."""
    x = a.data
    r = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    small = r < 1e-6
    rs = np.where(small, 1.0, r)
    # log1p(r)/r and (d/dr)(log1p(r)/r) / r, series-expanded near zero
    ratio = np.where(small, 1.0 - r / 2 + r * r / 3, np.log1p(r) / rs)
    dratio_over_r = np.where(
        small,
        0.0,
        (r / (1.0 + r) - np.log1p(r)) / (rs * rs * rs),
    )
    out = x * ratio

    def bw(g):
        dot = (x * g).sum(axis=-1, keepdims=True)
        extra = np.where(small, -0.5 * x * dot / np.where(r > 0, r, 1.0), x * dratio_over_r * dot)
        return (g * ratio + extra,)

    return make_result(out.astype(x.dtype, copy=False), (a,), bw)


def _pair(a, b):
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    return a, b
