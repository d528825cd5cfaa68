"""Procedural desk-scale scenes with exact pinhole ground truth.

The world is the inside of an axis-aligned box room with a few spheres
near its centre. Every pixel ray is intersected analytically, so local
pointmaps are exact and global pointmaps follow from the poses. Camera
axes follow the usual convention: x right, y down, z forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..evaluation import Trajectory
from ..geometry import CameraPose, focal_from_fov, pixel_grid, principal_point

TRAJECTORY_KINDS = ("orbit", "line", "random_walk", "static")


@dataclass(frozen=True)
class SceneParams:
    n_frames: int = 20
    height: int = 64
    width: int = 64
    fov_deg: float = 60.0
    trajectory: str = "orbit"
    room_half_extent: tuple = (2.5, 1.5, 2.5)
    n_spheres: int = 5
    orbit_radius: float = 1.2
    orbit_arc_deg: float = 360.0
    line_length: float = 1.0
    step_size: float = 0.05
    fps: float = 30.0

    def __post_init__(self):
        if self.trajectory not in TRAJECTORY_KINDS:
            raise ContractError(f"unknown trajectory {self.trajectory!r}, expected one of {TRAJECTORY_KINDS}")
        if self.n_frames < 1 or self.height < 1 or self.width < 1:
            raise ContractError("frame count and image size must be positive")
        if not 0 < self.fov_deg < 180:
            raise ContractError("field of view must be in (0, 180) degrees")
        if self.orbit_radius >= min(self.room_half_extent[0], self.room_half_extent[2]):
            raise ContractError("orbit must stay inside the room")

    @property
    def focal(self) -> float:
        return focal_from_fov(self.fov_deg, self.height)


@dataclass
class Sphere:
    center: np.ndarray
    radius: float
    color: np.ndarray


@dataclass
class SyntheticScene:
    params: SceneParams
    poses: list  # camera-to-world
    spheres: list
    images: np.ndarray  # [F, H, W, 3] in [0, 1]
    local_pts: np.ndarray  # [F, H, W, 3]
    valid: np.ndarray  # [F, H, W]
    seed: int = 0
    _global_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_frames(self) -> int:
        return len(self.poses)

    @property
    def focal(self) -> float:
        return self.params.focal

    @property
    def height(self) -> int:
        return self.params.height

    @property
    def width(self) -> int:
        return self.params.width

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.params.fps

    def relative_pose(self, i: int, reference: int = 0) -> CameraPose:
        """Camera ``i`` expressed in the camera frame of ``reference``."""
        return self.poses[reference].inverse().compose(self.poses[i])

    def global_pts(self, i: int, reference: int = 0) -> np.ndarray:
        key = (i, reference)
        if key not in self._global_cache:
            self._global_cache[key] = self.relative_pose(i, reference).apply(self.local_pts[i])
        return self._global_cache[key]

    def trajectory(self, reference: int = 0, frames=None) -> Trajectory:
        frames = range(self.n_frames) if frames is None else frames
        ts = self.timestamps
        return Trajectory.from_pairs((ts[i], self.relative_pose(i, reference)) for i in frames)

    def world_points(self, stride: int = 1) -> np.ndarray:
        """Every observed surface point in world coordinates."""
        out = []
        for i in range(self.n_frames):
            pts = self.local_pts[i][::stride, ::stride][self.valid[i][::stride, ::stride]]
            out.append(self.poses[i].apply(pts))
        return np.concatenate(out) if out else np.zeros((0, 3))


def look_at(position: np.ndarray, target: np.ndarray) -> CameraPose:
    fwd = np.asarray(target, dtype=np.float64) - position
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, -1.0, 0.0])
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.array([1.0, 0.0, 0.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return CameraPose.from_matrix(np.stack([right, down, fwd], axis=1), position)


def make_trajectory(params: SceneParams, rng: np.random.Generator) -> list[CameraPose]:
    n = params.n_frames
    kind = params.trajectory
    height = rng.uniform(-0.2, 0.2)
    if kind == "orbit":
        phase = rng.uniform(0, 2 * np.pi)
        arc = np.deg2rad(params.orbit_arc_deg)
        # a full circle must not revisit the starting pose
        span = arc * (n / (n + 1)) if params.orbit_arc_deg >= 360 else arc
        angles = phase + np.linspace(0.0, span, n)
        return [
            look_at(np.array([params.orbit_radius * np.cos(a), height, params.orbit_radius * np.sin(a)]), np.zeros(3))
            for a in angles
        ]
    if kind == "line":
        xs = np.linspace(-params.line_length / 2, params.line_length / 2, n)
        z0 = -params.orbit_radius
        return [look_at(np.array([x, height, z0]), np.array([x, height, z0 + 1.0])) for x in xs]
    if kind == "static":
        pose = look_at(np.array([0.0, height, -params.orbit_radius]), np.zeros(3))
        return [pose] * n
    pos = np.array([0.0, height, -params.orbit_radius])
    target = np.zeros(3)
    poses = []
    lim = np.array(params.room_half_extent) * 0.6
    for _ in range(n):
        poses.append(look_at(pos.copy(), target))
        pos = np.clip(pos + rng.normal(0.0, params.step_size, 3), -lim, lim)
        target = target + rng.normal(0.0, params.step_size, 3)
        if np.linalg.norm(target - pos) < 0.3:
            target = pos + (target - pos) / max(np.linalg.norm(target - pos), 1e-9) * 0.3
    return poses


def make_spheres(params: SceneParams, rng: np.random.Generator) -> list[Sphere]:
    spheres = []
    for _ in range(params.n_spheres):
        r = rng.uniform(0.12, 0.3)
        c = rng.uniform(-0.55, 0.55, 3) * np.array([1.0, 0.6, 1.0])
        spheres.append(Sphere(c, r, rng.uniform(0.2, 1.0, 3)))
    return spheres


def _box_hits(origin: np.ndarray, dirs: np.ndarray, half: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exit distance of rays starting inside the box, and the axis hit."""
    with np.errstate(divide="ignore"):
        inv = 1.0 / dirs
    t_pos = (half - origin) * inv
    t_neg = (-half - origin) * inv
    t_exit = np.where(dirs > 0, t_pos, np.where(dirs < 0, t_neg, np.inf))
    axis = np.argmin(t_exit, axis=-1)
    return np.take_along_axis(t_exit, axis[..., None], -1)[..., 0], axis


def _sphere_hits(origin: np.ndarray, dirs: np.ndarray, s: Sphere) -> np.ndarray:
    oc = origin - s.center
    a = (dirs * dirs).sum(-1)
    b = 2.0 * (dirs @ oc)
    c = oc @ oc - s.radius**2
    disc = b * b - 4 * a * c
    t = np.full(dirs.shape[:-1], np.inf)
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = (-b - sq) / (2 * a)
    t1 = (-b + sq) / (2 * a)
    t0 = np.where(t0 > 1e-6, t0, np.where(t1 > 1e-6, t1, np.inf))
    t[ok] = t0[ok]
    return t


def _texture(world: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Smooth multi-frequency pattern modulating a per-surface base color."""
    x, y, z = world[..., 0], world[..., 1], world[..., 2]
    pat = 0.5 + 0.25 * np.sin(7.0 * x + 3.0 * y) * np.cos(5.0 * z - 2.0 * y) + 0.25 * np.sin(13.0 * (x + z))
    return np.clip(base * pat[..., None] + 0.1 * np.stack([np.sin(3 * x), np.sin(3 * y), np.sin(3 * z)], -1) + 0.1, 0.0, 1.0)


WALL_COLORS = np.array(
    [[0.8, 0.5, 0.4], [0.4, 0.7, 0.5], [0.5, 0.5, 0.9], [0.9, 0.8, 0.4], [0.6, 0.4, 0.7], [0.4, 0.8, 0.8]]
)


def render_view(pose: CameraPose, params: SceneParams, spheres: list[Sphere]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(image [H,W,3], local points [H,W,3], valid [H,W]) for one camera."""
    H, W = params.height, params.width
    f = params.focal
    u, v = pixel_grid(H, W)
    cx, cy = principal_point(H, W)
    d_cam = np.stack([(u - cx) / f, (v - cy) / f, np.ones_like(u)], axis=-1)
    d_world = d_cam @ pose.R.T
    origin = pose.translation
    half = np.asarray(params.room_half_extent, dtype=np.float64)
    t, axis = _box_hits(origin, d_world, half)
    surface = axis * 2 + (np.take_along_axis(d_world, axis[..., None], -1)[..., 0] < 0)
    colors = WALL_COLORS[surface]
    for k, s in enumerate(spheres):
        ts = _sphere_hits(origin, d_world, s)
        closer = ts < t
        t = np.where(closer, ts, t)
        colors = np.where(closer[..., None], s.color, colors)
    valid = np.isfinite(t) & (t > 0)
    local = d_cam * np.where(valid, t, 0.0)[..., None]
    world = origin + d_world * np.where(valid, t, 0.0)[..., None]
    image = np.where(valid[..., None], _texture(world, colors), 0.0)
    return image, local, valid


def synth_scene(seed: int = 0, params: SceneParams | None = None, layout_seed: int | None = None) -> SyntheticScene:
    """Render a scene; ``layout_seed`` fixes the sphere layout independently of the trajectory."""
    params = params or SceneParams()
    rng = np.random.default_rng(seed)
    spheres = make_spheres(params, rng)
    if layout_seed is not None:
        spheres = make_spheres(params, np.random.default_rng(layout_seed))
    poses = make_trajectory(params, rng)
    H, W = params.height, params.width
    images = np.zeros((len(poses), H, W, 3))
    local = np.zeros((len(poses), H, W, 3))
    valid = np.zeros((len(poses), H, W), dtype=bool)
    for i, pose in enumerate(poses):
        images[i], local[i], valid[i] = render_view(pose, params, spheres)
    return SyntheticScene(params, poses, spheres, images, local, valid, seed=seed)
