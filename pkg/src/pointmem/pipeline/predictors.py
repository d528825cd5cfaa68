"""Predictors consumed by the reconstruction pipelines.

A predictor turns frame indices into :class:`Prediction` objects given a
running memory. Two implementations share the interface: the network
(:class:`ModelPredictor`) and a ground-truth oracle with a simple noise
model (:class:`OraclePredictor`), which decouples pipeline tests from
network quality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autograd import no_grad
from ..errors import ContractError
from ..geometry import FrameKind, PointMap, Prediction
from ..model import MemoryState, MultiViewNet
from .synthetic import SyntheticScene


@dataclass
class Pending:
    """Tokens of frames predicted but not yet inserted into memory."""

    frame_ids: tuple
    entries: list | None = None


@dataclass
class RunningMemory:
    """Mutable handle on the (immutable) memory state of one run."""

    state: MemoryState | None = None
    frame_ids: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame_ids)

    @property
    def reference_id(self) -> int | None:
        return self.frame_ids[0] if self.frame_ids else None

    def append(self, new_tokens: Pending) -> None:
        if self.state is not None and new_tokens.entries is not None:
            self.state = self.state.append(new_tokens.frame_ids, new_tokens.entries)
        self.frame_ids.extend(new_tokens.frame_ids)


@dataclass(frozen=True)
class OracleConfig:
    noise_sigma: float = 0.0
    focal_jitter: float = 0.0
    dropout_frac: float = 0.0

    def __post_init__(self):
        for name in ("noise_sigma", "focal_jitter", "dropout_frac"):
            if not getattr(self, name) >= 0:
                raise ContractError(f"{name} must be non-negative")
        if self.dropout_frac > 1:
            raise ContractError("dropout_frac must be at most 1")


def oracle_predict(
    scene: SyntheticScene,
    i: int,
    cfg: OracleConfig = OracleConfig(),
    seed: int = 0,
    reference: int = 0,
    sigma_scale: float = 1.0,
) -> Prediction:
    """Ground-truth pointmaps of frame ``i`` perturbed per ``cfg``.

    Noise is isotropic Gaussian in meters, drawn from a stream fixed by
    ``(seed, i)`` so repeated calls agree; ``sigma_scale`` scales the same
    draw. Confidence is ``1 + 1 / (1 + |noise| / sigma)`` so it stays >= 1
    and decreases with the actual perturbation. Focal jitter rescales the
    local x, y coordinates by a factor ``1 + focal_jitter * g``, ``g`` ~ N(0, 1).
    """
    if not 0 <= i < scene.n_frames:
        raise ContractError(f"frame {i} out of range [0, {scene.n_frames})")
    rng = np.random.default_rng([seed, i])
    H, W = scene.height, scene.width
    z_glob = rng.standard_normal((H, W, 3))
    z_loc = rng.standard_normal((H, W, 3))
    g = rng.standard_normal()
    drop = rng.random((H, W)) < cfg.dropout_frac
    sigma = cfg.noise_sigma * sigma_scale
    local = scene.local_pts[i].copy()
    glob = scene.global_pts(i, reference).copy()
    if cfg.focal_jitter > 0:
        local[..., :2] *= 1.0 + cfg.focal_jitter * g
    if sigma > 0:
        glob += sigma * z_glob
        local += sigma * z_loc
        conf = 1.0 + 1.0 / (1.0 + np.linalg.norm(z_glob, axis=-1))
    else:
        conf = np.full((H, W), 2.0)
    valid = scene.valid[i] & ~drop
    return Prediction(
        PointMap(glob, valid, FrameKind.GLOBAL_FRAME1),
        PointMap(local, valid, FrameKind.LOCAL_CAMERA),
        conf,
        image_id=i,
    )


class OraclePredictor:
    """Oracle with a memory-dependent noise level.

    A frame predicted against a memory of ``m`` frames gets noise
    ``sigma / sqrt(max(1, m))``, modelling the error reduction brought by
    a larger context; the per-pixel draw is fixed per frame. Global maps
    are expressed in the camera of the first frame stored in memory.
    """

    def __init__(self, scene: SyntheticScene, cfg: OracleConfig = OracleConfig(), seed: int = 0):
        self.scene = scene
        self.cfg = cfg
        self.seed = seed

    def new_memory(self) -> RunningMemory:
        return RunningMemory()

    def _predict(self, i: int, reference: int, m: int) -> Prediction:
        return oracle_predict(self.scene, i, self.cfg, self.seed, reference, 1.0 / np.sqrt(max(1, m)))

    def __call__(self, frame: int, memory: RunningMemory) -> tuple[Prediction, Pending]:
        ref = memory.reference_id if len(memory) else frame
        return self._predict(frame, ref, len(memory)), Pending((frame,))

    def extend(self, frames: Sequence[int], memory: RunningMemory) -> list[Prediction]:
        frames = list(frames)
        ref = memory.reference_id if len(memory) else frames[0]
        # frames processed jointly also see each other
        m = len(memory) + len(frames) - 1
        preds = [self._predict(i, ref, m) for i in frames]
        memory.append(Pending(tuple(frames)))
        return preds

    def render(self, frames: Sequence[int], memory: RunningMemory, batch_size: int | None = None) -> list[Prediction]:
        return [self._predict(i, memory.reference_id, len(memory)) for i in frames]

    def descriptors(self, frames: Sequence[int]) -> list[np.ndarray]:
        """Per-image token stand-ins: 8x8 color patches flattened."""
        out = []
        for i in frames:
            img = self.scene.images[i]
            H, W, _ = img.shape
            p = 8
            t = img[: H // p * p, : W // p * p].reshape(H // p, p, W // p, p, 3).transpose(0, 2, 1, 3, 4)
            out.append(t.reshape(-1, p * p * 3))
        return out


def _as_numpy_prediction(pred: Prediction) -> Prediction:
    return Prediction(
        PointMap(np.asarray(pred.global_pts.array()), frame=FrameKind.GLOBAL_FRAME1),
        PointMap(np.asarray(pred.local_pts.array()), frame=FrameKind.LOCAL_CAMERA),
        pred.conf_array(),
        image_id=pred.image_id,
    )


class ModelPredictor:
    """The network as a predictor over a fixed image collection."""

    def __init__(self, net: MultiViewNet, images: np.ndarray, batch_size: int | None = None):
        self.net = net
        self.images = np.asarray(images)
        self.batch_size = batch_size
        self._tokens: dict = {}

    def new_memory(self) -> RunningMemory:
        return RunningMemory(state=self.net.empty_memory())

    def tokens(self, frames: Sequence[int]):
        missing = [i for i in frames if i not in self._tokens]
        if missing:
            with no_grad():
                seqs = self.net.encode(self.images[missing].astype(np.float32), missing)
            self._tokens.update({i: s for i, s in zip(missing, seqs)})
        return [self._tokens[i] for i in frames]

    def __call__(self, frame: int, memory: RunningMemory) -> tuple[Prediction, Pending]:
        with no_grad():
            preds, entries = self.net.forward_new(memory.state, self.tokens([frame]), dropout_p=0.0)
        return _as_numpy_prediction(preds[0]), Pending((frame,), entries)

    def extend(self, frames: Sequence[int], memory: RunningMemory) -> list[Prediction]:
        with no_grad():
            preds, entries = self.net.forward_new(memory.state, self.tokens(list(frames)), dropout_p=0.0)
        memory.append(Pending(tuple(frames), entries))
        return [_as_numpy_prediction(p) for p in preds]

    def render(self, frames: Sequence[int], memory: RunningMemory, batch_size: int | None = None) -> list[Prediction]:
        with no_grad():
            preds = self.net.render(memory.state, self.tokens(list(frames)), batch_size or self.batch_size)
        return [_as_numpy_prediction(p) for p in preds]

    def descriptors(self, frames: Sequence[int]) -> list[np.ndarray]:
        return [np.asarray(t.tokens.data) for t in self.tokens(list(frames))]
