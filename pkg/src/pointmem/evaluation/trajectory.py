"""Timestamped camera trajectories and the TUM text format.

A TUM line is ``timestamp tx ty tz qx qy qz qw``; blank lines and lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import AssociationError, ContractError, ParseError
from ..geometry import CameraPose

log = logging.getLogger(__name__)

ASSOCIATION_WINDOW = 0.02  # seconds
MIN_ASSOCIATIONS = 3


@dataclass
class Trajectory:
    timestamps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    poses: list = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        self.poses = list(self.poses)
        if len(self.timestamps) != len(self.poses):
            raise ContractError(f"{len(self.timestamps)} timestamps for {len(self.poses)} poses")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ContractError("trajectory timestamps must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, CameraPose]]) -> "Trajectory":
        pairs = list(pairs)
        return cls(np.array([t for t, _ in pairs], dtype=np.float64), [p for _, p in pairs])

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self):
        return iter(zip(self.timestamps, self.poses))

    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.stack([p.translation for p in self.poses])

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.timestamps + dt, self.poses)

    def transformed(self, g: CameraPose) -> "Trajectory":
        """Apply a world-frame similarity ``g`` to every pose."""
        return Trajectory(self.timestamps, [g.compose(p) for p in self.poses])


def associate(est: Trajectory, gt: Trajectory, window: float = ASSOCIATION_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Greedy nearest-timestamp matching within ``window``; returns index pairs.

    Candidate pairs are taken in order of increasing time gap so every
    entry is used at most once.
    """
    if len(est) == 0 or len(gt) == 0:
        raise AssociationError("cannot associate an empty trajectory")
    te, tg = est.timestamps, gt.timestamps
    j = np.clip(np.searchsorted(tg, te), 1, max(1, len(tg) - 1))
    cand = []
    for i, jj in enumerate(j):
        for k in (jj - 1, jj):
            if 0 <= k < len(tg):
                d = abs(te[i] - tg[k])
                if d <= window:
                    cand.append((d, i, k))
    cand.sort()
    used_e, used_g, pairs = set(), set(), []
    for _, i, k in cand:
        if i not in used_e and k not in used_g:
            used_e.add(i)
            used_g.add(k)
            pairs.append((i, k))
    if len(pairs) < MIN_ASSOCIATIONS:
        raise AssociationError(f"only {len(pairs)} timestamp matches within {window * 1000:.0f} ms (need {MIN_ASSOCIATIONS})")
    pairs.sort()
    ie, ig = np.array(pairs).T
    return ie, ig


def parse_tum(lines: Sequence[str], path=None) -> Trajectory:
    stamps, poses = [], []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fields = s.split()
        if len(fields) != 8:
            raise ParseError(f"expected 8 fields, got {len(fields)}", line=lineno, path=path)
        try:
            vals = [float(v) for v in fields]
        except ValueError as e:
            raise ParseError(f"non-numeric field ({e})", line=lineno, path=path) from None
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite value", line=lineno, path=path)
        q = np.array(vals[4:8])
        n = np.linalg.norm(q)
        if n == 0:
            raise ParseError("zero quaternion", line=lineno, path=path)
        if abs(n - 1.0) > 1e-6:
            log.warning("%s:%d: quaternion norm %.6g, normalizing", path or "<tum>", lineno, n)
        if stamps and vals[0] <= stamps[-1]:
            raise ParseError(f"timestamp {vals[0]} is not after {stamps[-1]}", line=lineno, path=path)
        stamps.append(vals[0])
        poses.append(CameraPose(q / n, vals[1:4]))
    return Trajectory(np.array(stamps), poses)


def read_tum(path) -> Trajectory:
    path = Path(path)
    return parse_tum(path.read_text().splitlines(), path=str(path))


def format_tum(traj: Trajectory) -> str:
    out = ["# timestamp tx ty tz qx qy qz qw"]
    for t, p in traj:
        vals = [t, *p.translation, *p.rotation]
        out.append(" ".join(repr(float(v)) for v in vals))
    return "\n".join(out) + "\n"


def write_tum(path, traj: Trajectory) -> None:
    if any(p.scale != 1.0 for p in traj.poses):
        log.warning("TUM format drops pose scale")
    Path(path).write_text(format_tum(traj))
