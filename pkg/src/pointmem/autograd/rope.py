"""2D axial rotary position embedding over a patch grid."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


class RotaryTable:
    """Precomputed cos/sin for tokens at integer (row, col) grid positions.

    The head dimension is split in two halves: the first half is rotated by
    the row coordinate, the second by the column coordinate. Within each
    half the usual rotate-half pairing is used.
    """

    def __init__(self, grid: np.ndarray, head_dim: int, base: float = 100.0):
        if head_dim % 4:
            raise DimensionError(f"2D rotary embedding needs head_dim % 4 == 0, got {head_dim}")
        grid = np.asarray(grid)
        self.head_dim = head_dim
        self.half = head_dim // 2
        quarter = self.half // 2
        inv_freq = base ** (-np.arange(quarter, dtype=np.float64) / quarter)
        parts_cos, parts_sin = [], []
        for axis in (0, 1):
            angles = grid[:, axis, None].astype(np.float64) * inv_freq[None, :]
            angles = np.concatenate([angles, angles], axis=1)
            parts_cos.append(np.cos(angles))
            parts_sin.append(np.sin(angles))
        self.cos = np.concatenate(parts_cos, axis=1)
        self.sin = np.concatenate(parts_sin, axis=1)

    def rotate(self, x: np.ndarray) -> np.ndarray:
        q = self.half // 2
        a1, a2 = x[..., :q], x[..., q : self.half]
        b1, b2 = x[..., self.half : self.half + q], x[..., self.half + q :]
        return np.concatenate([-a2, a1, -b2, b1], axis=-1)

    def rotate_transpose(self, g: np.ndarray) -> np.ndarray:
        q = self.half // 2
        a1, a2 = g[..., :q], g[..., q : self.half]
        b1, b2 = g[..., self.half : self.half + q], g[..., self.half + q :]
        return np.concatenate([a2, -a1, b2, -b1], axis=-1)
