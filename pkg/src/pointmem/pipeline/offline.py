"""Offline reconstruction of an unordered image collection.

Keyframes are picked by farthest point sampling on an image-similarity
matrix, ordered greedily by connectivity, passed through the network to
build the memory, and then every image is rendered against that memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ContractError, DegenerateInputError
from ..geometry import CameraPose, Prediction, recover_pose

log = logging.getLogger(__name__)


def pooled_similarity(tokenseqs: Sequence[np.ndarray]) -> np.ndarray:
    """Cosine similarity of mean-pooled token sequences, [N, N]."""
    if len(tokenseqs) < 1:
        raise ContractError("at least one token sequence is required")
    pooled = np.stack([np.asarray(t, dtype=np.float64).reshape(-1, np.shape(t)[-1]).mean(0) for t in tokenseqs])
    n = np.linalg.norm(pooled, axis=1, keepdims=True)
    unit = pooled / np.where(n > 0, n, 1.0)
    sim = unit @ unit.T
    sim = 0.5 * (sim + sim.T)
    np.fill_diagonal(sim, 1.0)
    return sim


def select_keyframes_fps(sim: np.ndarray, K: int) -> list[int]:
    """Greedy max-min selection on ``d = 1 - sim``.

    The seed is the image with minimal total similarity; each next pick
    maximises the distance to the nearest already-selected image. Ties go
    to the lowest index.
    """
    sim = np.asarray(sim, dtype=np.float64)
    N = sim.shape[0]
    if sim.shape != (N, N):
        raise ContractError(f"similarity must be square, got {sim.shape}")
    if not 1 <= K <= N:
        raise ContractError(f"K={K} outside [1, {N}]")
    d = 1.0 - sim
    chosen = [int(np.argmin(sim.sum(1)))]
    nearest = d[chosen[0]].copy()
    nearest[chosen[0]] = -np.inf
    while len(chosen) < K:
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, d[nxt])
        nearest[chosen] = -np.inf
    return chosen


def order_greedy(sim: np.ndarray, keyframes: Sequence[int]) -> list[int]:
    """Most-connected keyframe first, then repeatedly the one most similar to the selected set."""
    keys = list(keyframes)
    if not keys:
        raise ContractError("keyframes must be non-empty")
    sub = np.asarray(sim, dtype=np.float64)[np.ix_(keys, keys)]
    conn = sub.sum(1) - np.diag(sub)
    order = [int(np.argmax(conn))]
    best = sub[order[0]].copy()
    remaining = [k for k in range(len(keys)) if k != order[0]]
    while remaining:
        nxt = max(remaining, key=lambda k: (best[k], -k))
        order.append(nxt)
        remaining.remove(nxt)
        best = np.maximum(best, sub[nxt])
    return [keys[k] for k in order]


@dataclass
class Reconstruction:
    frames: list
    predictions: list
    poses: list
    focals: list
    keyframes: list
    order: list
    similarity: np.ndarray

    @property
    def reference(self) -> int:
        return self.order[0]

    def pose_of(self, frame: int) -> CameraPose:
        return self.poses[self.frames.index(frame)]

    def point_cloud(self, conf_quantile: float = 0.0) -> np.ndarray:
        out = []
        for p in self.predictions:
            m = p.valid
            if m.any() and conf_quantile > 0:
                c = p.conf_array()
                m = m & (c >= np.quantile(c[m], conf_quantile))
            out.append(p.global_pts.array()[m])
        return np.concatenate(out) if out else np.zeros((0, 3))


def offline_reconstruct(
    frames: Sequence[int],
    predictor,
    K: int,
    batch_s: int = 1,
    strict: bool = True,
) -> Reconstruction:
    """Keyframes by FPS, greedy ordering, memory building, then render all frames.

    The first two ordered keyframes initialise the memory jointly, the
    rest are inserted ``batch_s`` at a time. Rendering is read-only, so
    poses of keyframes come from the same render pass as all others.
    Pose-recovery failures propagate unless ``strict`` is off, in which
    case the frame gets ``None`` for its pose and NaN for its focal.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ContractError("offline reconstruction needs at least 2 images")
    if batch_s < 1:
        raise ContractError("batch_s must be positive")
    sim = pooled_similarity(predictor.descriptors(frames))
    local_keys = select_keyframes_fps(sim, K)
    local_order = order_greedy(sim, local_keys)
    order = [frames[k] for k in local_order]
    memory = predictor.new_memory()
    head = min(2, len(order))
    predictor.extend(order[:head], memory)
    for s in range(head, len(order), batch_s):
        predictor.extend(order[s : s + batch_s], memory)
    preds: list[Prediction] = predictor.render(frames, memory, batch_s)
    poses, focals = [], []
    for p in preds:
        try:
            pose, focal = recover_pose(p)
        except DegenerateInputError as e:
            if strict:
                raise
            log.warning("image %s: pose recovery failed (%s)", p.image_id, e)
            pose, focal = None, float("nan")
        poses.append(pose)
        focals.append(focal)
    return Reconstruction(frames, preds, poses, focals, sorted(frames[k] for k in local_keys), order, sim)
