"""Trajectory and intrinsics error metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DegenerateInputError
from ..geometry import CameraPose, fov_from_focal, umeyama
from .trajectory import Trajectory, associate


class Alignment(enum.Enum):
    RIGID = "rigid"
    SIMILARITY = "sim"


def align_trajectories(est: Trajectory, gt: Trajectory, align: Alignment = Alignment.SIMILARITY):
    """Associate, then fit ``gt ≈ g(est)``; returns (g, est positions, gt positions)."""
    ie, ig = associate(est, gt)
    pe = est.positions()[ie]
    pg = gt.positions()[ig]
    g = umeyama(pe, pg, with_scale=align is Alignment.SIMILARITY, allow_collinear=True)
    return g, pe, pg


def ate_residuals(est: Trajectory, gt: Trajectory, align: Alignment = Alignment.SIMILARITY) -> np.ndarray:
    """Per-pose position residuals in meters after alignment."""
    g, pe, pg = align_trajectories(est, gt, align)
    return np.linalg.norm(g.apply(pe) - pg, axis=1)


def ate_rmse(est: Trajectory, gt: Trajectory, align: Alignment = Alignment.SIMILARITY) -> float:
    """Absolute trajectory error RMSE in centimeters."""
    r = ate_residuals(est, gt, align)
    return float(np.sqrt(np.mean(r**2)) * 100.0)


def scale_error(est: Trajectory, gt: Trajectory) -> float:
    """``|1 - s| * 100`` with ``s`` the similarity scale mapping est onto gt."""
    ie, ig = associate(est, gt)
    pe = est.positions()[ie]
    if np.ptp(pe, axis=0).max() == 0 or np.ptp(gt.positions()[ig], axis=0).max() == 0:
        raise DegenerateInputError("static trajectory has no scale")
    g, _, _ = align_trajectories(est, gt, Alignment.SIMILARITY)
    return abs(1.0 - g.scale) * 100.0


def fov_error(f_est: float, f_gt: float, height: float) -> float:
    """Absolute vertical field-of-view difference in degrees."""
    if not (f_est > 0 and f_gt > 0):
        raise ContractError("focal lengths must be positive")
    return abs(fov_from_focal(f_est, height) - fov_from_focal(f_gt, height))


@dataclass
class MetricsReport:
    ate_rmse_cm: float
    fov_error_deg: float
    scale_error_pct: float
    fps: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fov_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("ate_rmse_cm", "fov_error_deg", "scale_error_pct", "fps"):
            v = getattr(self, name)
            if not v >= 0:
                raise ContractError(f"{name} must be non-negative, got {v}")

    def as_dict(self) -> dict:
        r = np.asarray(self.residuals, dtype=np.float64) * 100.0
        fe = np.asarray(self.fov_errors, dtype=np.float64)
        return {
            "ate_rmse_cm": self.ate_rmse_cm,
            "ate_mean_cm": float(r.mean()) if r.size else 0.0,
            "ate_median_cm": float(np.median(r)) if r.size else 0.0,
            "fov_error_deg": self.fov_error_deg,
            "fov_error_median_deg": float(np.median(fe)) if fe.size else self.fov_error_deg,
            "scale_error_pct": self.scale_error_pct,
            "fps": self.fps,
        }

    def format(self) -> str:
        return "\n".join(f"{k} {v:.6f}" for k, v in self.as_dict().items()) + "\n"


def evaluate(
    est: Trajectory,
    gt: Trajectory,
    focals_est=None,
    focal_gt: float | None = None,
    height: float | None = None,
    fps: float = 0.0,
    align: Alignment = Alignment.SIMILARITY,
) -> MetricsReport:
    """Full report; the FoV error is the mean over frames (median also kept)."""
    res = ate_residuals(est, gt, align)
    ate = float(np.sqrt(np.mean(res**2)) * 100.0)
    try:
        se = scale_error(est, gt)
    except DegenerateInputError:
        se = 0.0
    fe = np.zeros(0)
    if focals_est is not None and focal_gt is not None and height is not None:
        fe = np.array([fov_error(f, focal_gt, height) for f in np.atleast_1d(focals_est)])
    return MetricsReport(ate, float(fe.mean()) if fe.size else 0.0, se, fps, res, fe)


def pose_error(est: CameraPose, gt: CameraPose) -> tuple[float, float]:
    """(translation distance, rotation angle in radians)."""
    return float(np.linalg.norm(est.translation - gt.translation)), est.rotation_angle_to(gt)
