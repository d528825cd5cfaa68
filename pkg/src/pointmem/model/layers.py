"""Transformer blocks for the encoder and the memory decoder.

Token tensors are ``[F, T, d]`` (frames, tokens, channels).
"""

from __future__ import annotations

import numpy as np

from ..autograd import LayerNorm, Linear, Mlp, Module, Tensor, ops


def split_heads(x: Tensor, heads: int) -> Tensor:
    F, T, d = x.shape
    return ops.transpose(ops.reshape(x, (F, T, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    F, h, T, dh = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (F, T, h * dh))


class SelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.proj = Linear(dim, dim, rng)

    def __call__(self, x: Tensor, rope=None) -> Tensor:
        h = self.heads
        out = ops.attention(split_heads(self.q(x), h), split_heads(self.k(x), h), split_heads(self.v(x), h), rope=rope)
        return self.proj(merge_heads(out))


class CrossAttention(Module):
    """Attention from frame tokens to a context; no positional encoding."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.proj = Linear(dim, dim, rng)

    def __call__(self, x: Tensor, ctx: Tensor) -> Tensor:
        h = self.heads
        q = split_heads(self.q(x), h)
        k = split_heads(self.k(ctx), h)
        v = split_heads(self.v(ctx), h)
        return self.proj(merge_heads(ops.attention(q, k, v)))


class EncoderBlock(Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(dim)
        self.attn = SelfAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.mlp = Mlp(dim, dim * mlp_ratio, rng)

    def __call__(self, x: Tensor, rope) -> Tensor:
        x = ops.add(x, self.attn(self.norm1(x), rope))
        return ops.add(x, self.mlp(self.norm2(x)))


class DecoderBlock(Module):
    """Residual self-attention (rotary), cross-attention to a context, MLP."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(dim)
        self.attn = SelfAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.norm_y = LayerNorm(dim)
        self.cross = CrossAttention(dim, heads, rng)
        self.norm3 = LayerNorm(dim)
        self.mlp = Mlp(dim, dim * mlp_ratio, rng)

    def __call__(self, x: Tensor, ctx: Tensor, rope) -> Tensor:
        x = ops.add(x, self.attn(self.norm1(x), rope))
        x = ops.add(x, self.cross(self.norm2(x), self.norm_y(ctx)))
        return ops.add(x, self.mlp(self.norm3(x)))
