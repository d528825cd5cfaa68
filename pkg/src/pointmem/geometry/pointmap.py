"""Pointmaps, their regression / confidence losses, and pose recovery."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..autograd import Tensor, ops
from ..errors import ContractError, DegenerateInputError
from .camera import estimate_focal
from .pose import CameraPose, umeyama

ArrayLike = Union[np.ndarray, Tensor]

DEFAULT_KEEP_FRACTION = 0.7
CONF_ALPHA = 0.2


class FrameKind(enum.Enum):
    LOCAL_CAMERA = "local"
    GLOBAL_FRAME1 = "global"


class NormalizerMode(enum.Enum):
    METRIC = "metric"
    SCALE_INVARIANT = "scale_invariant"


class LossSpace(enum.Enum):
    LOG = "log"
    LINEAR = "linear"


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


@dataclass
class PointMap:
    """Per-pixel 3D points [H, W, 3] with a validity mask [H, W]."""

    pts: ArrayLike
    valid: np.ndarray | None = None
    frame: FrameKind = FrameKind.GLOBAL_FRAME1

    def __post_init__(self):
        shape = _arr(self.pts).shape
        if len(shape) != 3 or shape[-1] != 3:
            raise ContractError(f"pointmap must be [H, W, 3], got {shape}")
        if self.valid is None:
            self.valid = np.isfinite(_arr(self.pts)).all(-1)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != shape[:2]:
                raise ContractError(f"valid mask {self.valid.shape} does not match pointmap {shape[:2]}")

    @property
    def shape(self) -> tuple:
        return _arr(self.pts).shape[:2]

    def array(self) -> np.ndarray:
        return np.asarray(_arr(self.pts), dtype=np.float64)

    def depth(self) -> np.ndarray:
        return self.array()[..., 2]


@dataclass
class Prediction:
    """Network (or oracle) output for one frame.

    ``global_pts`` is expressed in the reference camera frame, ``local_pts``
    in the frame's own camera; ``conf`` >= 1.
    """

    global_pts: PointMap
    local_pts: PointMap
    conf: ArrayLike
    image_id: int | None = None

    @property
    def valid(self) -> np.ndarray:
        return self.global_pts.valid & self.local_pts.valid

    def conf_array(self) -> np.ndarray:
        return np.asarray(_arr(self.conf), dtype=np.float64)


def log_map(x: ArrayLike) -> ArrayLike:
    """``x / |x| * log(1 + |x|)`` over the last axis; f(0) = 0."""
    if isinstance(x, Tensor):
        return ops.log_map(x)
    x = np.asarray(x, dtype=np.float64)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    ratio = np.where(r > 0, np.log1p(r) / np.where(r > 0, r, 1.0), 1.0)
    return x * ratio


def _mean_distance(flat: Tensor) -> Tensor:
    return ops.mean(ops.norm(flat, axis=-1))


def regression_loss(
    pred: PointMap,
    gt: PointMap,
    norm: NormalizerMode = NormalizerMode.METRIC,
    space: LossSpace = LossSpace.LOG,
) -> Tensor:
    """Per-valid-pixel regression error, a 1-D tensor over ``gt.valid`` pixels.

    Both maps are divided by normalising factors (mean distance of valid
    points to the origin); in metric mode the prediction reuses the
    ground-truth factor. Log space applies :func:`log_map` before the
    difference.
    """
    p = pred.pts if isinstance(pred.pts, Tensor) else Tensor(pred.pts)
    g = np.asarray(_arr(gt.pts), dtype=p.dtype)
    if p.shape != g.shape:
        raise ContractError(f"prediction {p.shape} and ground truth {g.shape} differ in shape")
    idx = np.flatnonzero(gt.valid.reshape(-1))
    if idx.size == 0:
        raise DegenerateInputError("no valid ground-truth pixels")
    p_flat = ops.take(p.reshape(-1, 3), idx, axis=0)
    g_flat = g.reshape(-1, 3)[idx]
    z_gt = float(np.linalg.norm(g_flat, axis=-1).mean())
    if z_gt <= 0:
        raise DegenerateInputError("ground-truth points all at the origin")
    if norm is NormalizerMode.METRIC:
        p_n = ops.mul(p_flat, 1.0 / z_gt)
    else:
        z_pred = _mean_distance(p_flat)
        if not float(z_pred.data) > 0:
            raise DegenerateInputError("scale-invariant normaliser is zero")
        p_n = ops.div(p_flat, z_pred)
    g_n = Tensor(g_flat / z_gt, dtype=p.dtype)
    if space is LossSpace.LOG:
        p_n = ops.log_map(p_n)
        g_n = Tensor(log_map(g_n.data), dtype=p.dtype)
    return ops.norm(ops.sub(p_n, g_n), axis=-1)


def confidence_loss(loss_map: Tensor, conf: ArrayLike, valid_idx: np.ndarray | None = None, alpha: float = CONF_ALPHA) -> Tensor:
    """mean(conf * loss - alpha * log(conf)) over the pixels of ``loss_map``.

    ``conf`` is [H, W] (or already flat); ``valid_idx`` selects the flat
    pixels that ``loss_map`` was computed on.
    """
    if alpha < 0:
        raise ContractError("confidence weight alpha must be non-negative")
    c = conf if isinstance(conf, Tensor) else Tensor(conf, dtype=loss_map.dtype)
    c = c.reshape(-1)
    if valid_idx is not None:
        c = ops.take(c, valid_idx, axis=0)
    if c.shape != loss_map.shape:
        raise ContractError(f"confidence {c.shape} does not match loss map {loss_map.shape}")
    return ops.mean(ops.sub(ops.mul(c, loss_map), ops.mul(ops.log(c), alpha)))


def confident_mask(conf: np.ndarray, valid: np.ndarray, keep_fraction: float = DEFAULT_KEEP_FRACTION) -> np.ndarray:
    """Top ``keep_fraction`` of valid pixels by confidence (ties broken by pixel order)."""
    conf = np.asarray(conf, dtype=np.float64).reshape(-1)
    valid = np.asarray(valid, dtype=bool).reshape(-1)
    idx = np.flatnonzero(valid & np.isfinite(conf))
    keep = int(math.ceil(keep_fraction * idx.size))
    order = np.argsort(-conf[idx], kind="stable")
    mask = np.zeros(conf.size, dtype=bool)
    mask[idx[order[:keep]]] = True
    return mask


def recover_pose(
    pred: Prediction,
    conf_thresh: float | None = None,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    with_scale: bool = False,
) -> tuple[CameraPose, float]:
    """Camera-to-reference pose and focal from a prediction's two pointmaps.

    Pixels are selected either by ``conf > conf_thresh`` or, when no
    threshold is given, as the ``keep_fraction`` most confident valid
    pixels. The focal comes from the local map; the pose is the
    confidence-weighted Procrustes fit of local onto global points.
    """
    conf = pred.conf_array()
    H, W = conf.shape
    valid = pred.valid
    if conf_thresh is None:
        mask = confident_mask(conf, valid, keep_fraction).reshape(H, W)
    else:
        mask = valid & (conf > conf_thresh)
    if mask.sum() < 8:
        raise DegenerateInputError(f"only {int(mask.sum())} confident pixels for pose recovery")
    local = pred.local_pts.array()
    glob = pred.global_pts.array()
    focal = estimate_focal(local, conf, valid=mask)
    pose = umeyama(local[mask], glob[mask], conf[mask], with_scale=with_scale)
    return pose, focal
