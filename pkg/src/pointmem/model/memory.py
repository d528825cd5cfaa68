"""Token sequences and the per-layer decoder memory."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autograd import Tensor, ops
from ..errors import ContractError, EmptyMemoryError


@dataclass
class TokenSeq:
    """Encoder tokens of one image, with their patch-grid coordinates."""

    tokens: Tensor
    grid: np.ndarray
    image_id: int
    grid_shape: tuple[int, int]

    def __len__(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class MemoryEntry:
    """One frame's tokens at one decoder layer.

    ``raw`` holds the decoder features that survived token dropout;
    ``augmented`` adds the terminal-layer feedback (equal to ``raw`` at the
    last memory layer).
    """

    raw: Tensor
    augmented: Tensor
    kept_token_ids: np.ndarray

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.raw.data).tobytes())
        h.update(np.ascontiguousarray(self.augmented.data).tobytes())
        h.update(np.ascontiguousarray(self.kept_token_ids, dtype=np.int64).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class MemoryState:
    """Immutable per-layer memory; ``layers[l][k]`` is frame ``frame_ids[k]`` at layer ``l``."""

    layers: tuple = ()
    frame_ids: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def empty(cls, n_layers: int) -> "MemoryState":
        return cls(layers=tuple(() for _ in range(n_layers)), frame_ids=())

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_frames(self) -> int:
        return len(self.frame_ids)

    def __len__(self) -> int:
        return self.n_frames

    def is_empty(self) -> bool:
        return not self.frame_ids

    @property
    def reference_id(self) -> int | None:
        return self.frame_ids[0] if self.frame_ids else None

    def n_tokens(self, layer: int = 0) -> int:
        return sum(e.raw.shape[0] for e in self.layers[layer])

    def append(self, frame_ids: Sequence[int], entries: Sequence[Sequence[MemoryEntry]]) -> "MemoryState":
        """New state with frames appended; ``entries[f][l]`` is frame f at layer l."""
        frame_ids = tuple(int(i) for i in frame_ids)
        clash = set(frame_ids) & set(self.frame_ids)
        if clash or len(set(frame_ids)) != len(frame_ids):
            raise ContractError(f"duplicate image ids in memory: {sorted(clash) or frame_ids}")
        if len(entries) != len(frame_ids):
            raise ContractError("one entry list per appended frame is required")
        layers = []
        for l in range(self.n_layers):
            layers.append(self.layers[l] + tuple(entries[f][l] for f in range(len(frame_ids))))
        return MemoryState(layers=tuple(layers), frame_ids=self.frame_ids + frame_ids)

    def context(self, layer: int) -> Tensor:
        """Augmented tokens of every stored frame at ``layer``, concatenated: [M, d]."""
        if self.is_empty():
            raise EmptyMemoryError("memory is empty")
        cached = self._cache.get(layer)
        if cached is None:
            cached = ops.concat([e.augmented for e in self.layers[layer]], axis=0)
            self._cache[layer] = cached
        return cached

    def entry(self, frame_id: int, layer: int) -> MemoryEntry:
        return self.layers[layer][self.frame_ids.index(frame_id)]

    def frame_digest(self, frame_id: int) -> str:
        h = hashlib.sha256()
        for l in range(self.n_layers):
            h.update(self.entry(frame_id, l).digest().encode())
        return h.hexdigest()

    def digest(self) -> str:
        h = hashlib.sha256()
        for fid in self.frame_ids:
            h.update(str(fid).encode())
            h.update(self.frame_digest(fid).encode())
        return h.hexdigest()

    def detached(self) -> "MemoryState":
        """Copy with every tensor cut from the autodiff graph."""
        layers = tuple(
            tuple(MemoryEntry(e.raw.detach(), e.augmented.detach(), e.kept_token_ids) for e in layer)
            for layer in self.layers
        )
        return MemoryState(layers=layers, frame_ids=self.frame_ids)
