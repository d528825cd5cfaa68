"""Viewing-direction-aware spatial index of the reconstructed scene.

Points are routed to one of eight KD-trees by the sign pattern of the ray
they were observed along. A frame's *discovery rate* is a percentile of its
depth-normalised nearest-neighbour distances to the stored scene; frames
whose discovery rate exceeds a threshold are admitted to memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractError

N_OCTANTS = 8
REBUILD_GROWTH = 0.5
_SCAN_BLOCK = 1 << 20


@dataclass(frozen=True)
class GateParams:
    tau_d: float = 0.05
    p: float = 85.0

    def __post_init__(self):
        if not 0 < self.tau_d < 1:
            raise ContractError(f"tau_d must be in (0, 1), got {self.tau_d}")
        if not 0 < self.p < 100:
            raise ContractError(f"percentile must be in (0, 100), got {self.p}")


def octant_index(dirs: np.ndarray) -> np.ndarray | int:
    """bit0 = x < 0, bit1 = y < 0, bit2 = z < 0; zero components count as non-negative."""
    d = np.asarray(dirs, dtype=np.float64)
    single = d.ndim == 1
    d = d.reshape(-1, 3)
    if np.any(~(np.abs(d).sum(1) > 0)):
        raise ContractError("viewing direction must be non-zero")
    idx = (d[:, 0] < 0).astype(np.int64) + 2 * (d[:, 1] < 0) + 4 * (d[:, 2] < 0)
    return int(idx[0]) if single else idx


class _OctantIndex:
    """KD-tree over a bulk-built prefix plus a linear-scan overflow buffer."""

    def __init__(self):
        self.points = np.zeros((0, 3))
        self.rays = np.zeros((0, 3))
        self.tree: cKDTree | None = None
        self.built = 0

    def __len__(self) -> int:
        return len(self.points)

    def add(self, pts: np.ndarray, rays: np.ndarray) -> None:
        self.points = np.concatenate([self.points, pts])
        self.rays = np.concatenate([self.rays, rays])
        if len(self.points) >= (1 + REBUILD_GROWTH) * self.built or self.tree is None:
            self.tree = cKDTree(self.points)
            self.built = len(self.points)

    def nearest(self, queries: np.ndarray) -> np.ndarray:
        if len(self.points) == 0:
            return np.full(len(queries), np.inf)
        dist, _ = self.tree.query(queries, k=1)
        if self.built < len(self.points):
            extra = self.points[self.built :]
            block = max(1, _SCAN_BLOCK // len(extra))
            for s in range(0, len(queries), block):
                q = queries[s : s + block]
                d2 = ((q[:, None, :] - extra[None, :, :]) ** 2).sum(-1)
                dist[s : s + block] = np.minimum(dist[s : s + block], np.sqrt(d2.min(1)))
        return dist


class SceneStore:
    """Eight viewing-direction octant indices over accumulated 3D points."""

    def __init__(self):
        self._octants = [_OctantIndex() for _ in range(N_OCTANTS)]

    @property
    def counts(self) -> list[int]:
        return [len(o) for o in self._octants]

    def __len__(self) -> int:
        return sum(self.counts)

    def octant_points(self, k: int) -> np.ndarray:
        return self._octants[k].points

    def insert(self, points: np.ndarray, rays: np.ndarray) -> None:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        rays = np.asarray(rays, dtype=np.float64).reshape(-1, 3)
        if len(points) != len(rays):
            raise ContractError(f"{len(points)} points but {len(rays)} rays")
        if len(points) == 0:
            return
        oct_idx = octant_index(rays)
        for k in range(N_OCTANTS):
            sel = oct_idx == k
            if sel.any():
                self._octants[k].add(points[sel], rays[sel])

    def nearest(self, points: np.ndarray, rays: np.ndarray) -> np.ndarray:
        """Distance from each query to its nearest stored point in the ray's octant (inf if empty)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        rays = np.asarray(rays, dtype=np.float64).reshape(-1, 3)
        if len(points) != len(rays):
            raise ContractError(f"{len(points)} points but {len(rays)} rays")
        out = np.full(len(points), np.inf)
        if len(points) == 0:
            return out
        oct_idx = octant_index(rays)
        for k in range(N_OCTANTS):
            sel = oct_idx == k
            if sel.any():
                out[sel] = self._octants[k].nearest(points[sel])
        return out

    def nearest_normalized(self, points: np.ndarray, rays: np.ndarray, depths: np.ndarray) -> np.ndarray:
        depths = np.asarray(depths, dtype=np.float64).reshape(-1)
        if np.any(~(depths > 0)):
            raise ContractError("depths must be positive")
        return self.nearest(points, rays) / depths

    def write_ply(self, path) -> None:
        from .evaluation.ply import write_ply

        pts = np.concatenate([o.points for o in self._octants])
        rays = np.concatenate([o.rays for o in self._octants])
        write_ply(path, pts, normals=rays)


def nearest_rank_percentile(values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (+inf sorts last)."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ContractError("percentile of an empty set")
    if not 0 < p <= 100:
        raise ContractError(f"percentile must be in (0, 100], got {p}")
    rank = max(1, math.ceil(Fraction(str(p)) * v.size / 100))
    return float(v[rank - 1])


def discovery_rate(normalized_distances: np.ndarray, p: float) -> float:
    return nearest_rank_percentile(normalized_distances, p)
