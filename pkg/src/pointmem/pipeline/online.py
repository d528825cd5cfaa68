"""Online uncalibrated visual odometry with a discovery-gated memory."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import ContractError, DegenerateInputError
from ..evaluation import Trajectory
from ..geometry import CameraPose, Prediction, recover_pose
from ..scene import GateParams, SceneStore, discovery_rate
from .predictors import RunningMemory

log = logging.getLogger(__name__)


@dataclass
class FrameResult:
    frame: int
    pose: CameraPose | None
    focal: float
    depth: np.ndarray
    added_to_memory: bool
    discovery: float
    global_pts: np.ndarray | None = None
    valid: np.ndarray | None = None


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def online_update(
    frame: int,
    predictor,
    memory: RunningMemory,
    scene3d: SceneStore,
    gate: GateParams = GateParams(),
) -> FrameResult:
    """Process one incoming frame; may append it to ``memory`` and ``scene3d``.

    Steps: forward with the current memory, depth and focal from the local
    map, pose by Procrustes of local onto global points, per-pixel viewing
    rays from the camera centre, then gate on the discovery rate (the
    ``gate.p`` percentile of nearest-scene distances over depth). The first
    frame always enters. A frame whose pose cannot be recovered is skipped.
    """
    first = len(memory) == 0
    pred, new_tokens = predictor(frame, memory)
    Xi1 = pred.global_pts.array()
    Xii = pred.local_pts.array()
    depth = Xii[..., -1]
    try:
        pose, focal = recover_pose(pred)
    except DegenerateInputError as e:
        if not first:
            log.warning("frame %d: pose recovery failed (%s); skipped", frame, e)
            return FrameResult(frame, None, float("nan"), depth, False, float("nan"))
        # the first frame defines the reference camera, so its pose is known
        log.warning("frame %d: pose recovery failed (%s); using the reference pose", frame, e)
        pose, focal = CameraPose.identity(), float("nan")
    rays = _normalize(Xi1 - pose.t)
    sel = pred.valid & (depth > 0) & np.isfinite(depth)
    pts, r, d = Xi1[sel], rays[sel], depth[sel]
    if first:
        discovery = float("inf")
    elif pts.shape[0] == 0:
        discovery = float("nan")
    else:
        dists = scene3d.nearest(pts, r)
        discovery = discovery_rate(dists / d, gate.p)
    added = bool(discovery > gate.tau_d)
    if added:
        memory.append(new_tokens)
        scene3d.insert(pts, r)
    return FrameResult(frame, pose, focal, depth, added, discovery, Xi1, sel)


@dataclass
class VORun:
    causal: list
    rendered: list | None
    memory: RunningMemory
    scene3d: SceneStore
    timestamps: np.ndarray
    fps: float
    keyframes: list = field(default_factory=list)

    def trajectory(self, rendered: bool | None = None) -> Trajectory:
        use = self.rendered if (rendered or (rendered is None and self.rendered is not None)) else self.causal
        if use is None:
            raise ContractError("no rendered pass was run")
        return Trajectory.from_pairs((self.timestamps[k], r.pose) for k, r in enumerate(use) if r.pose is not None)

    def results(self, rendered: bool | None = None) -> list:
        if rendered or (rendered is None and self.rendered is not None):
            return self.rendered
        return self.causal


def render_results(predictor, frames: Sequence[int], memory: RunningMemory, causal: list, batch_size=None) -> list:
    """Re-predict every frame against the final memory; gate fields copy the causal pass."""
    preds: list[Prediction] = predictor.render(list(frames), memory, batch_size)
    out = []
    for pred, old in zip(preds, causal):
        try:
            pose, focal = recover_pose(pred)
        except DegenerateInputError as e:
            log.warning("frame %d: pose recovery failed on render (%s)", old.frame, e)
            pose, focal = None, float("nan")
        depth = pred.local_pts.array()[..., -1]
        out.append(replace(old, pose=pose, focal=focal, depth=depth, global_pts=pred.global_pts.array(), valid=pred.valid))
    return out


def run_vo_full(
    frames: Sequence[int],
    predictor,
    gate: GateParams = GateParams(),
    render_final: bool = False,
    timestamps: Sequence[float] | None = None,
    batch_size: int | None = None,
) -> VORun:
    frames = list(frames)
    if not frames:
        raise ContractError("at least one frame is required")
    ts = np.arange(len(frames), dtype=np.float64) if timestamps is None else np.asarray(timestamps, dtype=np.float64)
    memory = predictor.new_memory()
    scene3d = SceneStore()
    causal = []
    t0 = time.perf_counter()
    for f in frames:
        causal.append(online_update(f, predictor, memory, scene3d, gate))
    fps = len(frames) / max(time.perf_counter() - t0, 1e-9)
    rendered = render_results(predictor, frames, memory, causal, batch_size) if render_final else None
    return VORun(causal, rendered, memory, scene3d, ts, fps, keyframes=list(memory.frame_ids))


def run_vo(
    frames: Sequence[int],
    predictor,
    gate: GateParams = GateParams(),
    render_final: bool = False,
    timestamps: Sequence[float] | None = None,
) -> tuple[Trajectory, list[FrameResult]]:
    run = run_vo_full(frames, predictor, gate, render_final, timestamps)
    return run.trajectory(render_final), run.results(render_final)
