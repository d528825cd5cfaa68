from .camera import estimate_focal, focal_from_fov, fov_from_focal, pixel_grid, principal_point, unproject_depth
from .pointmap import (
    CONF_ALPHA,
    FrameKind,
    LossSpace,
    NormalizerMode,
    PointMap,
    Prediction,
    confidence_loss,
    confident_mask,
    log_map,
    recover_pose,
    regression_loss,
)
from .pose import CameraPose, alignment_residual, umeyama

__all__ = [
    "CONF_ALPHA",
    "CameraPose",
    "FrameKind",
    "LossSpace",
    "NormalizerMode",
    "PointMap",
    "Prediction",
    "alignment_residual",
    "confidence_loss",
    "confident_mask",
    "estimate_focal",
    "focal_from_fov",
    "fov_from_focal",
    "log_map",
    "pixel_grid",
    "principal_point",
    "recover_pose",
    "regression_loss",
    "umeyama",
    "unproject_depth",
]
