"""Rigid / similarity poses and weighted Procrustes alignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import ContractError, DegenerateInputError


@dataclass(frozen=True)
class CameraPose:
    """Similarity transform ``x -> scale * R @ x + translation``.

    ``rotation`` is a unit quaternion in (x, y, z, w) order. For camera
    poses the transform maps camera coordinates into the reference frame.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0:
            raise ContractError("rotation quaternion must be non-zero and finite")
        # canonical sign: w >= 0
        q = q / n
        if q[3] < 0:
            q = -q
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        if not self.scale > 0:
            raise ContractError(f"pose scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls()

    @classmethod
    def from_matrix(cls, R: np.ndarray, t, scale: float = 1.0) -> "CameraPose":
        return cls(Rotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat(), t, scale)

    @property
    def R(self) -> np.ndarray:
        return Rotation.from_quat(self.rotation).as_matrix()

    @property
    def t(self) -> np.ndarray:
        return self.translation

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.scale * self.R
        T[:3, 3] = self.translation
        return T

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * pts @ self.R.T + self.translation

    def inverse(self) -> "CameraPose":
        Rt = self.R.T
        return CameraPose.from_matrix(Rt, -(Rt @ self.translation) / self.scale, 1.0 / self.scale)

    def compose(self, other: "CameraPose") -> "CameraPose":
        """``self ∘ other``: apply ``other`` first."""
        R = self.R @ other.R
        t = self.scale * self.R @ other.translation + self.translation
        return CameraPose.from_matrix(R, t, self.scale * other.scale)

    def rotation_angle_to(self, other: "CameraPose") -> float:
        """Geodesic angle in radians between the two rotations."""
        d = abs(float(np.dot(self.rotation, other.rotation)))
        return 2.0 * float(np.arccos(min(1.0, d)))


def umeyama(
    src: np.ndarray,
    dst: np.ndarray,
    weights: np.ndarray | None = None,
    with_scale: bool = False,
    allow_collinear: bool = False,
) -> CameraPose:
    """Weighted least-squares alignment ``dst ≈ s R src + t`` with det(R) = +1.

    Collinear inputs leave the rotation about the line undetermined and
    raise unless ``allow_collinear``, in which case any minimiser is
    returned (the residual is still well defined). Coincident points
    always raise.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ContractError(f"correspondence count mismatch: {len(src)} vs {len(dst)}")
    if len(src) < 3:
        raise DegenerateInputError(f"need at least 3 correspondences, got {len(src)}")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != len(src):
        raise ContractError("weights length does not match correspondences")
    if np.any(w < 0) or w.sum() <= 0:
        raise ContractError("weights must be non-negative with positive sum")
    w = w / w.sum()

    mu_s = w @ src
    mu_d = w @ dst
    sc = src - mu_s
    dc = dst - mu_d
    cov = (dc * w[:, None]).T @ sc
    U, D, Vt = np.linalg.svd(cov)
    spread = max(np.sqrt((w * (sc * sc).sum(1)).sum()), np.sqrt((w * (dc * dc).sum(1)).sum()))
    if spread == 0 or D[0] <= 1e-300:
        raise DegenerateInputError("coincident correspondences")
    if not allow_collinear and D[1] <= 1e-12 * max(D[0], spread**2):
        raise DegenerateInputError("rank-deficient correspondence covariance (collinear or coincident points)")
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    if with_scale:
        var_s = (w * (sc * sc).sum(1)).sum()
        scale = float((D * S).sum() / var_s)
    else:
        scale = 1.0
    t = mu_d - scale * R @ mu_s
    return CameraPose.from_matrix(R, t, scale)


def alignment_residual(pose: CameraPose, src: np.ndarray, dst: np.ndarray, weights=None) -> float:
    """Weighted RMS of ``dst - pose(src)``."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    r2 = ((dst - pose.apply(src)) ** 2).sum(1)
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
    return float(np.sqrt((w * r2).sum() / w.sum()))
