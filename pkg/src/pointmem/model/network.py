"""The multi-view pointmap network with an iteratively extended token memory.

A frozen-able ViT encoder turns each image into tokens. A single shared
decoder of ``L`` blocks processes every frame; at block ``l`` a frame
cross-attends to the memory's layer ``l-1`` tokens (and, when several new
frames are processed together, to each other's previous-layer tokens).
A linear head regresses a reference-frame pointmap, a camera-frame
pointmap and a confidence map per pixel.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..autograd import LayerNorm, Linear, Module, Parameter, RotaryTable, Tensor, ops
from ..errors import ContractError, DimensionError, EmptyMemoryError
from ..geometry import FrameKind, PointMap, Prediction
from .config import ModelConfig
from .injection import FeedbackInjection
from .layers import DecoderBlock, EncoderBlock
from .memory import MemoryEntry, MemoryState, TokenSeq

HEAD_CHANNELS = 7  # 3 reference-frame xyz, 3 camera-frame xyz, 1 confidence


class Encoder(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        p = cfg.patch_size
        self.patch_embed = Linear(3 * p * p, cfg.embed_dim_enc, rng)
        self.blocks = [EncoderBlock(cfg.embed_dim_enc, cfg.heads, cfg.mlp_ratio, rng) for _ in range(cfg.enc_depth)]
        self.norm = LayerNorm(cfg.embed_dim_enc)

    def __call__(self, patches: Tensor, rope) -> Tensor:
        x = self.patch_embed(patches)
        for blk in self.blocks:
            x = blk(x, rope)
        return self.norm(x)


class LinearHead(Module):
    def __init__(self, dim: int, patch: int, rng: np.random.Generator):
        self.patch = patch
        self.norm = LayerNorm(dim)
        self.proj = Linear(dim, HEAD_CHANNELS * patch * patch, rng)

    def __call__(self, x: Tensor, grid_shape: tuple[int, int]) -> Tensor:
        """[F, T, d] -> [F, H, W, 7]."""
        F = x.shape[0]
        gh, gw = grid_shape
        p = self.patch
        out = self.proj(self.norm(x))
        out = ops.reshape(out, (F, gh, gw, p, p, HEAD_CHANNELS))
        out = ops.transpose(out, (0, 1, 3, 2, 4, 5))
        return ops.reshape(out, (F, gh * p, gw * p, HEAD_CHANNELS))


class MultiViewNet(Module):
    def __init__(self, cfg: ModelConfig | None = None, rng: np.random.Generator | None = None):
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        # independent streams so that variants share identical weights for shared parts
        seeds = np.random.SeedSequence(cfg.seed).spawn(5)
        rngs = [np.random.default_rng(s) for s in seeds]
        if rng is not None:
            rngs = [rng] * 5
        self.encoder = Encoder(cfg, rngs[0])
        self.enc_to_dec = Linear(cfg.embed_dim_enc, cfg.embed_dim_dec, rngs[1])
        self.ref_embed = Parameter(rngs[1].normal(0.0, 0.02, size=cfg.embed_dim_dec))
        self.blocks = [DecoderBlock(cfg.embed_dim_dec, cfg.heads, cfg.mlp_ratio, rngs[2]) for _ in range(cfg.depth_L)]
        self.head = LinearHead(cfg.embed_dim_dec, cfg.patch_size, rngs[3])
        self.injection = FeedbackInjection(
            cfg.injection_variant, cfg.embed_dim_dec, cfg.depth_L, cfg.injection_hidden_mult, rngs[4]
        )
        self._rope_cache: dict = {}

    # ------------------------------------------------------------------ utils

    @property
    def n_memory_layers(self) -> int:
        return self.cfg.depth_L

    @property
    def dtype(self):
        return self.enc_to_dec.weight.dtype

    def empty_memory(self) -> MemoryState:
        return MemoryState.empty(self.n_memory_layers)

    def decoder_parameters(self) -> list[Parameter]:
        return [p for n, p in self.named_parameters() if not n.startswith("encoder.")]

    def _rope(self, grid_shape: tuple[int, int], head_dim: int) -> RotaryTable:
        key = (grid_shape, head_dim)
        if key not in self._rope_cache:
            self._rope_cache[key] = RotaryTable(rope_grid(grid_shape), head_dim, base=self.cfg.rope_base)
        return self._rope_cache[key]

    # ---------------------------------------------------------------- encoder

    def patchify(self, images: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
        images = np.asarray(images)
        if images.ndim == 3:
            images = images[None]
        F, H, W, C = images.shape
        p = self.cfg.patch_size
        if C != 3:
            raise DimensionError(f"images must have 3 channels, got {C}")
        if H % p or W % p:
            raise DimensionError(f"image size {H}x{W} is not divisible by patch size {p}")
        gh, gw = H // p, W // p
        x = images.reshape(F, gh, p, gw, p, 3).transpose(0, 1, 3, 2, 4, 5)
        return x.reshape(F, gh * gw, p * p * 3), (gh, gw)

    def encode(self, images: np.ndarray, image_ids: Sequence[int] | int) -> list[TokenSeq] | TokenSeq:
        """Patchify and encode one image [H, W, 3] or a stack [F, H, W, 3]."""
        single = np.asarray(images).ndim == 3
        ids = [image_ids] if single else list(image_ids)
        patches, grid_shape = self.patchify(images)
        if patches.shape[0] != len(ids):
            raise ContractError("one image id per image is required")
        rope = self._rope(grid_shape, self.cfg.embed_dim_enc // self.cfg.heads)
        toks = self.encoder(Tensor(patches, dtype=self.dtype), rope)
        grid = rope_grid(grid_shape)
        seqs = [TokenSeq(toks[f], grid, int(i), grid_shape) for f, i in enumerate(ids)]
        return seqs[0] if single else seqs

    # ---------------------------------------------------------------- decoder

    def project_and_mark(self, tok: TokenSeq, is_reference: bool) -> Tensor:
        d0 = self.enc_to_dec(tok.tokens)
        if not is_reference:
            d0 = ops.add(d0, self.ref_embed)
        return d0

    def _initial(self, frames: Sequence[TokenSeq], reference_id: int) -> Tensor:
        shapes = {f.grid_shape for f in frames}
        if len(shapes) != 1:
            raise DimensionError(f"frames processed together must share a resolution, got {shapes}")
        d0 = [self.project_and_mark(f, f.image_id == reference_id) for f in frames]
        return ops.stack(d0, axis=0)

    def _context(self, mem: MemoryState, layer: int, x_prev: Tensor, joint: bool) -> Tensor:
        F, T, d = x_prev.shape
        parts = []
        if not mem.is_empty():
            m = ops.reshape(mem.context(layer), (1, -1, d))
            if joint and F > 1:
                m = ops.broadcast_to(m, (F, m.shape[1], d))
            parts.append(m)
        if joint and F > 1:
            others = np.array([[j for j in range(F) if j != i] for i in range(F)])
            peers = ops.take(x_prev, others, axis=0)
            parts.append(ops.reshape(peers, (F, (F - 1) * T, d)))
        if not parts:
            if joint and F == 1:
                # a lone first frame attends to its own previous-layer tokens
                return x_prev
            raise EmptyMemoryError("no memory and no peer frames to attend to")
        return ops.concat(parts, axis=1) if len(parts) > 1 else parts[0]

    def decoder_forward(self, d0: Tensor, grid_shape: tuple[int, int], mem: MemoryState, joint: bool = True) -> list[Tensor]:
        """Run the decoder on frames ``d0`` [F, T, d]; returns ``[D^0, D^1, ..., D^L]``.

        With ``joint`` the frames are new memory candidates and see each
        other; otherwise (rendering) each frame sees only the memory.
        """
        rope = self._rope(grid_shape, self.cfg.embed_dim_dec // self.cfg.heads)
        xs = [d0]
        x = d0
        for l, blk in enumerate(self.blocks):
            x = blk(x, self._context(mem, l, x, joint), rope)
            xs.append(x)
        return xs

    def head_forward(self, d_last: Tensor, frames: Sequence[TokenSeq]) -> list[Prediction]:
        out = self.head(d_last, frames[0].grid_shape)
        preds = []
        for f, tok in enumerate(frames):
            glob = out[f, :, :, 0:3]
            loc = out[f, :, :, 3:6]
            conf = ops.add(ops.exp(out[f, :, :, 6]), 1.0)
            preds.append(
                Prediction(
                    PointMap(glob, frame=FrameKind.GLOBAL_FRAME1),
                    PointMap(loc, frame=FrameKind.LOCAL_CAMERA),
                    conf,
                    image_id=tok.image_id,
                )
            )
        return preds

    def inject_feedback(self, layers: list[Tensor], final: Tensor | None = None) -> list[Tensor]:
        return self.injection(layers, final)

    # ----------------------------------------------------------------- memory

    def forward_new(
        self,
        mem: MemoryState,
        frames: Sequence[TokenSeq],
        rng: np.random.Generator | None = None,
        dropout_p: float | None = None,
    ) -> tuple[list[Prediction], list[list[MemoryEntry]]]:
        """Predict for new frames and build (but do not insert) their memory entries."""
        if not frames:
            raise ContractError("at least one frame is required")
        ids = [f.image_id for f in frames]
        if len(set(ids)) != len(ids) or set(ids) & set(mem.frame_ids):
            raise ContractError(f"duplicate image id among {ids} / memory {mem.frame_ids}")
        p = self.cfg.dropout_p if dropout_p is None else dropout_p
        if p > 0 and rng is None:
            raise ContractError("token dropout needs an rng")
        ref = mem.reference_id if not mem.is_empty() else ids[0]
        d0 = self._initial(frames, ref)
        xs = self.decoder_forward(d0, frames[0].grid_shape, mem, joint=True)
        preds = self.head_forward(xs[-1], frames)
        L = self.n_memory_layers
        T = d0.shape[1]
        entries = []
        for f, tok in enumerate(frames):
            if p > 0 and tok.image_id != ref:
                keep = np.flatnonzero(rng.random(T) >= p)
                if keep.size == 0:
                    keep = np.array([int(rng.integers(T))])
            else:
                keep = np.arange(T)
            raw = [ops.take(xs[l][f], keep, axis=0) for l in range(L)]
            final = ops.take(xs[L][f], keep, axis=0)
            aug = self.inject_feedback(raw, final)
            entries.append([MemoryEntry(raw[l], aug[l], keep) for l in range(L)])
        return preds, entries

    def extend_memory(
        self,
        mem: MemoryState,
        frames: Sequence[TokenSeq],
        rng: np.random.Generator | None = None,
        dropout_p: float | None = None,
    ) -> tuple[MemoryState, list[Prediction]]:
        preds, entries = self.forward_new(mem, frames, rng=rng, dropout_p=dropout_p)
        return mem.append([f.image_id for f in frames], entries), preds

    def render(self, mem: MemoryState, frames: Sequence[TokenSeq], batch_size: int | None = None) -> list[Prediction]:
        """Predict frames against a fixed memory without inserting them."""
        if mem.is_empty():
            raise EmptyMemoryError("cannot render against an empty memory")
        if not frames:
            return []
        bs = batch_size or len(frames)
        preds: list[Prediction] = []
        for s in range(0, len(frames), bs):
            chunk = list(frames[s : s + bs])
            d0 = self._initial(chunk, mem.reference_id)
            xs = self.decoder_forward(d0, chunk[0].grid_shape, mem, joint=False)
            preds.extend(self.head_forward(xs[-1], chunk))
        return preds


def rope_grid(grid_shape: tuple[int, int]) -> np.ndarray:
    gh, gw = grid_shape
    rows, cols = np.meshgrid(np.arange(gh), np.arange(gw), indexing="ij")
    return np.stack([rows.ravel(), cols.ravel()], axis=1)
