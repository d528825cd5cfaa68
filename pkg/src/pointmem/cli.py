"""Command-line entry point.

Exit codes: 0 success, 1 selftest failure, 2 usage, 3 data error,
4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AssociationError,
    ContractError,
    DegenerateInputError,
    DimensionError,
    EmptyMemoryError,
    NonFiniteLossError,
    ParseError,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3, 4
IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".jpg", ".jpeg", ".bmp")

log = logging.getLogger("pointmem")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# ------------------------------------------------------------------ inputs


def load_images(directory, size: int | None = None, patch: int = 16) -> np.ndarray:
    """Every image in ``directory`` in name order as [F, H, W, 3] floats in [0, 1].

    Images are resized to ``size`` square when given, then centre-cropped
    to a multiple of the patch size.
    """
    from PIL import Image

    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ParseError(f"no images found in {directory}")
    out = []
    for p in paths:
        try:
            im = Image.open(p).convert("RGB")
        except OSError as exc:
            raise ParseError(f"cannot read image: {exc}", path=p) from exc
        if size is not None:
            im = im.resize((size, size), Image.BILINEAR)
        out.append(np.asarray(im, dtype=np.float64) / 255.0)
    shapes = {a.shape for a in out}
    if len(shapes) != 1:
        raise DimensionError(f"images differ in size: {sorted(shapes)}")
    H, W = out[0].shape[:2]
    h, w = H - H % patch, W - W % patch
    if h == 0 or w == 0:
        raise DimensionError(f"images of {H}x{W} are smaller than one {patch}px patch")
    top, left = (H - h) // 2, (W - w) // 2
    return np.stack([a[top : top + h, left : left + w] for a in out])


def _model(args):
    from .autograd.checkpoint import load_into
    from .model import ModelConfig, MultiViewNet

    cfg = ModelConfig.from_file(args.config) if args.config else ModelConfig(seed=args.seed)
    net = MultiViewNet(cfg)
    if args.model:
        load_into(net, args.model)
    return net


def _source(args):
    """(predictor, frames, scene or None, images or None)."""
    from .pipeline import ModelPredictor, OracleConfig, OraclePredictor, SceneParams, synth_scene

    if args.input == "synthetic":
        params = SceneParams(n_frames=args.frames, height=args.size, width=args.size, trajectory=args.trajectory)
        scene = synth_scene(args.seed, params)
        if args.oracle:
            pred = OraclePredictor(scene, OracleConfig(noise_sigma=args.noise), seed=args.seed)
        else:
            pred = ModelPredictor(_model(args), scene.images)
        return pred, list(range(scene.n_frames)), scene, scene.images
    if args.oracle:
        raise UsageError("--oracle needs ground truth and only works with --input synthetic")
    net = _model(args)
    images = load_images(args.input, args.resize, net.cfg.patch_size)
    return ModelPredictor(net, images), list(range(len(images))), None, images


def _add_source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", default="synthetic", help="'synthetic' or a directory of images")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--oracle", action="store_true", help="use the ground-truth oracle predictor (synthetic only)")
    src.add_argument("--model", metavar="CKPT", help="network checkpoint; without it the network is randomly initialised")
    p.add_argument("--config", help="flat key=value model config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="oracle pointmap noise sigma in metres")
    p.add_argument("--frames", type=int, default=50, help="synthetic frame count")
    p.add_argument("--size", type=int, default=64, help="synthetic image size")
    p.add_argument("--trajectory", default="orbit", choices=("orbit", "line", "random_walk", "static"))
    p.add_argument("--resize", type=int, default=None, help="resize directory images to this square size")
    p.add_argument("--gt", help="ground-truth TUM trajectory for --report on directory input")
    p.add_argument("--out-traj", help="write the estimated trajectory in TUM format")
    p.add_argument("--out-ply", help="write the reconstructed point cloud as ASCII PLY")
    p.add_argument("--ply-stride", type=int, default=2, help="pixel stride for the point cloud")
    p.add_argument("--report", help="write accuracy metrics against ground truth")


# ------------------------------------------------------------------ outputs


def _cloud(items, images, stride: int):
    """items: (frame, global points [H,W,3], valid [H,W]) triples."""
    pts, cols = [], []
    for f, g, valid in items:
        if g is None or valid is None:
            continue
        m = np.zeros_like(valid)
        m[::stride, ::stride] = True
        m &= valid & np.isfinite(g).all(-1)
        pts.append(g[m])
        cols.append(np.round(images[f][m] * 255).astype(np.uint8))
    if not pts:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8)
    return np.concatenate(pts), np.concatenate(cols)


def _write_outputs(args, traj, focals, cloud, scene, reference: int, fps: float) -> None:
    from .evaluation import read_tum, write_ply, write_tum

    if args.out_traj:
        write_tum(args.out_traj, traj)
    if args.out_ply:
        write_ply(args.out_ply, cloud[0], colors=cloud[1])
    if args.report:
        from .evaluation import evaluate

        if scene is not None:
            gt = scene.trajectory(reference)
            fgt, H = scene.focal, scene.height
        elif args.gt:
            gt, fgt, H = read_tum(args.gt), None, None
        else:
            raise UsageError("--report needs ground truth: use --input synthetic or pass --gt")
        f = np.asarray([x for x in focals if np.isfinite(x)])
        rep = evaluate(traj, gt, f if f.size else None, fgt, H, fps=0.0)
        # wall-clock speed is printed, not stored, so output files stay reproducible
        d = rep.as_dict()
        d.pop("fps")
        d["frames"] = len(traj.timestamps)
        Path(args.report).write_text("".join(f"{k} {v:.6f}\n" for k, v in d.items()))
        print("".join(f"{k} {v:.6f}\n" for k, v in d.items()), end="")
    print(f"fps {fps:.3f}")


# ------------------------------------------------------------------ commands


def cmd_vo(args) -> int:
    from .pipeline import run_vo_full
    from .scene import GateParams

    predictor, frames, scene, images = _source(args)
    ts = scene.timestamps if scene is not None else np.arange(len(frames)) / args.fps
    run = run_vo_full(frames, predictor, GateParams(args.tau_d, args.perc), args.render_final, ts, args.batch_s)
    results = run.results(args.render_final)
    traj = run.trajectory(args.render_final)
    print(f"frames {len(frames)} keyframes {len(run.keyframes)} posed {len(traj.timestamps)}")
    cloud = _cloud(((r.frame, r.global_pts, r.valid) for r in results), images, args.ply_stride)
    _write_outputs(args, traj, [r.focal for r in results], cloud, scene, frames[0], run.fps)
    return EXIT_OK


def cmd_offline(args) -> int:
    import time

    from .evaluation import Trajectory
    from .pipeline import offline_reconstruct

    predictor, frames, scene, images = _source(args)
    K = min(args.keyframes, len(frames))
    t0 = time.perf_counter()
    rec = offline_reconstruct(frames, predictor, K, args.batch_s, strict=False)
    fps = len(frames) / max(time.perf_counter() - t0, 1e-9)
    ts = scene.timestamps if scene is not None else np.arange(len(frames)) / args.fps
    pairs = [(ts[k], p) for k, p in enumerate(rec.poses) if p is not None]
    traj = Trajectory.from_pairs(pairs)
    print(f"images {len(frames)} keyframes {len(rec.keyframes)} reference {rec.reference} posed {len(pairs)}")
    cloud = _cloud(((f, p.global_pts.array(), p.valid) for f, p in zip(frames, rec.predictions)), images, args.ply_stride)
    _write_outputs(args, traj, rec.focals, cloud, scene, rec.reference, fps)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    from .autograd.checkpoint import save_checkpoint
    from .model import InjectionVariant, ModelConfig, MultiViewNet
    from .pipeline import TrainConfig, toy_scenes, toy_train

    cfg = ModelConfig.from_file(args.config) if args.config else ModelConfig(seed=args.seed)
    if args.variant:
        cfg.injection_variant = InjectionVariant(args.variant)
    net = MultiViewNet(cfg)
    scenes = toy_scenes(args.scenes, seed=args.seed)
    hist = toy_train(net, scenes, TrainConfig(steps=args.steps, lr=args.lr, seed=args.seed, optimizer=args.optimizer))
    first, last = hist.smoothed()
    print(f"steps {len(hist.losses)} smoothed_initial {first:.6f} smoothed_final {last:.6f} ratio {last / first:.4f}")
    if args.out:
        save_checkpoint(args.out, net.named_parameters())
    if args.loss_log:
        Path(args.loss_log).write_text("".join(f"{k},{v!r}\n" for k, v in enumerate(hist.losses)))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import Alignment, evaluate, read_tum

    est, gt = read_tum(args.est), read_tum(args.gt)
    if args.offset:
        est = est.shifted(args.offset)
    rep = evaluate(est, gt, align=Alignment(args.align))
    text = rep.format()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import rows_to_csv, run_bench

    rows = run_bench(ns=args.n, ss=args.s, reps=args.reps, image_size=args.image_size)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = selftest(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL


def selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Quick oracle checks of each subsystem; (name, passed, detail) per check."""
    from .autograd import Tensor, ops
    from .autograd.gradcheck import finite_diff_check
    from .evaluation import ate_rmse
    from scipy.spatial.transform import Rotation

    from .geometry import CameraPose, umeyama
    from .pipeline import OraclePredictor, SceneParams, run_vo, synth_scene
    from .scene import SceneStore, octant_index

    rng = np.random.default_rng(seed)
    out = []

    q, k, v = (Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True) for _ in range(3))
    err = finite_diff_check(lambda a, b, c: ops.sum(ops.attention(a, b, c)), [q, k, v], eps=1e-6)
    out.append(("gradient", err < 1e-4, f"attention max relative error {err:.2e}"))

    g = CameraPose.from_matrix(Rotation.random(random_state=seed).as_matrix(), rng.normal(size=3))
    src = rng.normal(size=(50, 3))
    fit = umeyama(src, g.apply(src))
    err = max(np.abs(fit.R - g.R).max(), np.abs(fit.t - g.t).max())
    out.append(("procrustes", err < 1e-9, f"max error {err:.2e}"))

    pts = rng.normal(size=(500, 3))
    rays = rng.normal(size=(500, 3))
    store = SceneStore()
    store.insert(pts, rays)
    qp, qr = rng.normal(size=(100, 3)), rng.normal(size=(100, 3))
    got = store.nearest(qp, qr)
    oq, op = octant_index(qr), octant_index(rays)
    ref = np.array([np.linalg.norm(pts[op == o] - x, axis=1).min() if (op == o).any() else np.inf for x, o in zip(qp, oq)])
    err = float(np.abs(got - ref)[np.isfinite(ref)].max())
    out.append(("kdtree", err <= 1e-12, f"max deviation from brute force {err:.2e}"))

    scene = synth_scene(seed, SceneParams(n_frames=12, height=32, width=32))
    traj, _ = run_vo(range(12), OraclePredictor(scene, seed=seed), timestamps=scene.timestamps)
    err = ate_rmse(traj, scene.trajectory(0))
    out.append(("vo", err < 0.1, f"noiseless oracle ATE {err:.2e} cm"))
    return out


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointmem", description="Multi-view pointmap reconstruction with a token memory.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("vo", help="online visual odometry over an image sequence")
    _add_source_args(p)
    p.add_argument("--tau-d", type=float, default=0.05, help="discovery threshold for memory insertion")
    p.add_argument("--perc", type=float, default=85.0, help="discovery percentile")
    p.add_argument("--render-final", action="store_true", help="re-render every frame against the final memory")
    p.add_argument("--batch-s", type=int, default=None, help="frames per render batch")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate used for directory timestamps")
    p.set_defaults(func=cmd_vo)

    p = sub.add_parser("offline", help="keyframe-based reconstruction of an unordered collection")
    _add_source_args(p)
    p.add_argument("--keyframes", type=int, default=10, help="number of keyframes K")
    p.add_argument("--batch-s", type=int, default=1, help="keyframes inserted per step and frames per render batch")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate used for directory timestamps")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("train-toy", help="train the network on synthetic tuples")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", default="adam", choices=("adam", "sgd"))
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--config", help="flat key=value model config")
    p.add_argument("--variant", choices=("none", "linear", "mlp"), help="override the feedback injection variant")
    p.add_argument("--out", help="write the trained checkpoint here")
    p.add_argument("--loss-log", help="write per-step losses as step,loss CSV")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("eval", help="compare two TUM trajectories")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--align", default="sim", choices=("sim", "rigid"))
    p.add_argument("--offset", type=float, default=0.0, help="seconds added to estimated timestamps")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="render latency against memory length n and batch size s")
    p.add_argument("--n", type=int, nargs="+", default=[2, 8, 32, 128])
    p.add_argument("--s", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--image-size", type=int, default=128)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run quick oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pointmem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"pointmem: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, AssociationError, DimensionError, EmptyMemoryError, OSError) as exc:
        print(f"pointmem: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateInputError, NonFiniteLossError) as exc:
        print(f"pointmem: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
