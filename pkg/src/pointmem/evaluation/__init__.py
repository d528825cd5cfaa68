from .metrics import (
    Alignment,
    MetricsReport,
    align_trajectories,
    ate_residuals,
    ate_rmse,
    evaluate,
    fov_error,
    pose_error,
    scale_error,
)
from .ply import read_ply, write_ply
from .trajectory import Trajectory, associate, format_tum, parse_tum, read_tum, write_tum

__all__ = [
    "Alignment",
    "MetricsReport",
    "Trajectory",
    "align_trajectories",
    "associate",
    "ate_residuals",
    "ate_rmse",
    "evaluate",
    "format_tum",
    "fov_error",
    "parse_tum",
    "pose_error",
    "read_ply",
    "read_tum",
    "scale_error",
    "write_ply",
    "write_tum",
]
