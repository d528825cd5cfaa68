"""Pinhole intrinsics: pixel grids, focal recovery and field of view."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError, DegenerateInputError

FOCAL_ITERATIONS = 10


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates ``(u, v)``, each [H, W]; pixel (0, 0) is centred at (0.5, 0.5)."""
    v, u = np.meshgrid(np.arange(height) + 0.5, np.arange(width) + 0.5, indexing="ij")
    return u, v


def principal_point(height: int, width: int) -> tuple[float, float]:
    return width / 2.0, height / 2.0


def estimate_focal(local_pts: np.ndarray, conf: np.ndarray | None = None, valid: np.ndarray | None = None) -> float:
    """Focal length (pixels) of a camera-frame pointmap.

    Fits ``(u - cx, v - cy) ≈ f * (x / z, y / z)`` with the principal point
    at the image centre, minimising the confidence-weighted sum of
    unsquared residual norms by Weiszfeld iteration. Starts from the
    median of per-pixel least-squares focals.
    """
    pts = np.asarray(local_pts, dtype=np.float64)
    H, W = pts.shape[:2]
    mask = np.isfinite(pts).all(-1) & (pts[..., 2] > 0)
    if valid is not None:
        mask &= np.asarray(valid, dtype=bool)
    if mask.sum() < 8:
        raise DegenerateInputError(f"focal estimation needs >= 8 valid pixels with z > 0, got {int(mask.sum())}")
    u, v = pixel_grid(H, W)
    cx, cy = principal_point(H, W)
    p = np.stack([u[mask] - cx, v[mask] - cy], axis=-1)
    q = pts[mask][:, :2] / pts[mask][:, 2:3]
    w = np.ones(len(p)) if conf is None else np.asarray(conf, dtype=np.float64)[mask]

    qq = (q * q).sum(1)
    pq = (p * q).sum(1)
    usable = qq > 1e-12
    if not usable.any():
        raise DegenerateInputError("all valid points lie on the optical axis")
    focal = float(np.median(pq[usable] / qq[usable]))
    for _ in range(FOCAL_ITERATIONS):
        r = np.linalg.norm(p - focal * q, axis=1)
        iw = w / np.maximum(r, 1e-9)
        denom = (iw * qq).sum()
        if denom <= 0:
            break
        focal = float((iw * pq).sum() / denom)
    if not focal > 0:
        raise DegenerateInputError(f"non-positive focal estimate {focal}")
    return focal


def fov_from_focal(focal: float, height: float) -> float:
    """Vertical field of view in degrees."""
    if not focal > 0:
        raise ContractError("focal must be positive")
    return math.degrees(2.0 * math.atan(height / (2.0 * focal)))


def focal_from_fov(fov_deg: float, height: float) -> float:
    return height / (2.0 * math.tan(math.radians(fov_deg) / 2.0))


def unproject_depth(depth: np.ndarray, focal: float) -> np.ndarray:
    """Camera-frame pointmap [H, W, 3] from a depth map and a centred pinhole."""
    H, W = depth.shape
    u, v = pixel_grid(H, W)
    cx, cy = principal_point(H, W)
    return np.stack([(u - cx) / focal * depth, (v - cy) / focal * depth, depth], axis=-1)
