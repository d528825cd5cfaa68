"""Terminal-layer feedback added to earlier memory layers."""

from __future__ import annotations

import numpy as np

from ..autograd import LayerNorm, Linear, Mlp, Module, Parameter, Tensor, ops
from .config import InjectionVariant


class FeedbackInjection(Module):
    """Maps a frame's terminal memory-layer tokens to a residual for layers 0..L-2.

    Variants: ``MLP`` (LayerNorm + two-layer MLP), ``LINEAR`` (LayerNorm +
    one linear map), ``CONSTANT`` (learned per-layer bias, input ignored),
    ``NONE`` (identity), ``FROM_LAYER_L`` (the MLP fed with the decoder's
    final output instead of the terminal memory layer).
    """

    def __init__(self, variant: InjectionVariant, dim: int, n_memory_layers: int, hidden_mult: int, rng: np.random.Generator):
        self.variant = variant
        self.n_memory_layers = n_memory_layers
        if variant in (InjectionVariant.MLP, InjectionVariant.FROM_LAYER_L):
            self.norm = LayerNorm(dim)
            self.mlp = Mlp(dim, dim * hidden_mult, rng)
        elif variant is InjectionVariant.LINEAR:
            self.norm = LayerNorm(dim)
            self.lin = Linear(dim, dim, rng)
        elif variant is InjectionVariant.CONSTANT:
            self.bias = Parameter(rng.normal(0.0, 0.02, size=(n_memory_layers - 1, dim)))

    def residual(self, terminal: Tensor, final: Tensor | None = None) -> Tensor | None:
        v = self.variant
        if v is InjectionVariant.MLP:
            return self.mlp(self.norm(terminal))
        if v is InjectionVariant.FROM_LAYER_L:
            return self.mlp(self.norm(final))
        if v is InjectionVariant.LINEAR:
            return self.lin(self.norm(terminal))
        return None

    def __call__(self, layers: list[Tensor], final: Tensor | None = None) -> list[Tensor]:
        """``layers`` are D^0..D^{L-1} of one or more frames; returns their augmented versions."""
        if self.variant is InjectionVariant.NONE:
            return list(layers)
        last = len(layers) - 1
        if self.variant is InjectionVariant.CONSTANT:
            return [x if l == last else ops.add(x, self.bias[l]) for l, x in enumerate(layers)]
        res = self.residual(layers[last], final)
        return [x if l == last else ops.add(x, res) for l, x in enumerate(layers)]
