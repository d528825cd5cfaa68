"""Toy-scale training on synthetic view tuples.

Each step draws a scene and a tuple of ``N`` views, builds the memory from
the first ``n`` of them (2 jointly, then one at a time, with token
dropout), renders all ``N`` views against the resulting memory and
regresses the ``n + N`` predictions. Every prediction contributes a
confidence-weighted regression loss on its reference-frame pointmap and on
its camera-frame pointmap; the step loss is the mean over predictions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autograd import SGD, Adam, Tensor, backward, no_grad, ops
from ..errors import ContractError, NonFiniteLossError
from ..geometry import LossSpace, NormalizerMode, PointMap, Prediction, confidence_loss, regression_loss
from ..model import MultiViewNet
from .synthetic import SceneParams, SyntheticScene, synth_scene

log = logging.getLogger(__name__)

N_VIEWS = 10


@dataclass
class TrainConfig:
    steps: int = 300
    lr: float = 1e-3
    momentum: float = 0.9
    clip_norm: float | None = 1.0
    n_views: int = N_VIEWS
    dropout_p: float = 0.05
    seed: int = 0
    smooth_window: int = 25
    norm: NormalizerMode = NormalizerMode.METRIC
    space: LossSpace = LossSpace.LOG
    freeze_encoder: bool = True
    optimizer: str = "adam"

    def __post_init__(self):
        if self.n_views < 2:
            raise ContractError("a training tuple needs at least 2 views")
        if self.steps < 0 or self.lr < 0:
            raise ContractError("steps and lr must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ContractError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    n_memory: list = field(default_factory=list)
    scene_ids: list = field(default_factory=list)

    def smoothed(self, window: int = 25) -> tuple[float, float]:
        """Mean loss over the first and the last ``window`` steps."""
        w = min(window, len(self.losses))
        if w == 0:
            raise ContractError("empty loss history")
        return float(np.mean(self.losses[:w])), float(np.mean(self.losses[-w:]))


def toy_scenes(n_scenes: int = 20, seed: int = 0, n_views: int = N_VIEWS, height: int = 64, width: int = 64) -> list[SyntheticScene]:
    kinds = ("orbit", "random_walk", "line")
    out = []
    for k in range(n_scenes):
        params = SceneParams(
            n_frames=n_views,
            height=height,
            width=width,
            trajectory=kinds[k % len(kinds)],
            orbit_arc_deg=90.0,
            step_size=0.08,
        )
        out.append(synth_scene(seed * 1000 + k, params))
    return out


def prediction_loss(pred: Prediction, gt_global: PointMap, gt_local: PointMap, cfg: TrainConfig) -> Tensor:
    """Confidence-wrapped regression on both pointmaps of one prediction."""
    total = None
    for p, g in ((pred.global_pts, gt_global), (pred.local_pts, gt_local)):
        idx = np.flatnonzero(g.valid.reshape(-1))
        reg = regression_loss(p, g, cfg.norm, cfg.space)
        term = confidence_loss(reg, pred.conf, idx)
        total = term if total is None else ops.add(total, term)
    return total


class ToyTrainer:
    def __init__(self, net: MultiViewNet, scenes: Sequence[SyntheticScene], cfg: TrainConfig | None = None):
        self.net = net
        self.scenes = list(scenes)
        self.cfg = cfg or TrainConfig()
        if not self.scenes:
            raise ContractError("no training scenes")
        for s in self.scenes:
            if s.n_frames < self.cfg.n_views:
                raise ContractError(f"scene has {s.n_frames} frames, need {self.cfg.n_views}")
        if self.cfg.freeze_encoder:
            net.encoder.freeze()
        if self.cfg.optimizer == "adam":
            self.opt = Adam(net.parameters(), self.cfg.lr, clip_norm=self.cfg.clip_norm)
        else:
            self.opt = SGD(net.parameters(), self.cfg.lr, self.cfg.momentum, self.cfg.clip_norm)
        self.rng = np.random.default_rng(self.cfg.seed)
        self.dropout_rng = np.random.default_rng([self.cfg.seed, 1])
        self._tokens: dict = {}

    def _scene_tokens(self, k: int):
        if k not in self._tokens:
            s = self.scenes[k]
            frozen = not any(p.requires_grad for p in self.net.encoder.parameters())
            if frozen:
                with no_grad():
                    self._tokens[k] = self.net.encode(s.images.astype(np.float32), list(range(s.n_frames)))
            else:
                return self.net.encode(s.images.astype(np.float32), list(range(s.n_frames)))
        return self._tokens[k]

    def sample(self) -> tuple[int, list[int], int]:
        """Scene index, view tuple (first view is the reference) and memory size n."""
        k = int(self.rng.integers(len(self.scenes)))
        views = [int(v) for v in self.rng.permutation(self.scenes[k].n_frames)[: self.cfg.n_views]]
        n = int(self.rng.integers(2, self.cfg.n_views + 1))
        return k, views, n

    def step_loss(self, k: int, views: list[int], n: int) -> Tensor:
        scene = self.scenes[k]
        toks = self._scene_tokens(k)
        seq = [toks[v] for v in views]
        ref = views[0]
        p = self.cfg.dropout_p
        mem = self.net.empty_memory()
        mem, preds = self.net.extend_memory(mem, seq[:2], rng=self.dropout_rng, dropout_p=p)
        for i in range(2, n):
            mem, pr = self.net.extend_memory(mem, [seq[i]], rng=self.dropout_rng, dropout_p=p)
            preds += pr
        preds += self.net.render(mem, seq)
        terms = []
        for pred in preds:
            v = pred.image_id
            gg = PointMap(scene.global_pts(v, ref), scene.valid[v])
            gl = PointMap(scene.local_pts[v], scene.valid[v])
            terms.append(prediction_loss(pred, gg, gl, self.cfg))
        return ops.mean(ops.stack(terms))

    def step(self) -> float:
        k, views, n = self.sample()
        self.opt.zero_grad()
        loss = self.step_loss(k, views, n)
        value = float(loss.data)
        if not np.isfinite(value):
            raise NonFiniteLossError(f"non-finite loss {value} (scene {k}, views {views}, n={n}, grad norm {self.opt.grad_norm():.3g})")
        if self.cfg.lr > 0 and loss.requires_grad:
            backward(loss)
            self.opt.step()
        self.last = (k, n)
        return value

    def run(self, steps: int | None = None) -> TrainHistory:
        hist = TrainHistory()
        for t in range(self.cfg.steps if steps is None else steps):
            hist.losses.append(self.step())
            hist.scene_ids.append(self.last[0])
            hist.n_memory.append(self.last[1])
            if t % 50 == 0:
                log.info("step %d loss %.4f", t, hist.losses[-1])
        return hist


def toy_train(net: MultiViewNet, scenes: Sequence[SyntheticScene], cfg: TrainConfig | None = None) -> TrainHistory:
    return ToyTrainer(net, scenes, cfg).run()
