"""Command-line entry point: ``seqvo {train,eval-depth,eval-odometry,infer,synth}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyGroundTruthError, IngestionError, NonFiniteLossError, ParseError

log = logging.getLogger("seqvo")


# -- train -------------------------------------------------------------------------------
def cmd_train(args):
    from .training import load_train_config, run_training

    overrides = {}
    if args.gan is not None:
        overrides["gan"] = args.gan
    if args.no_lstm:
        overrides["use_lstm"] = False
    if args.no_tc:
        overrides["use_trajectory_loss"] = False
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_steps is not None:
        overrides["max_steps"] = args.max_steps
    if args.checkpoint_dir is not None:
        overrides["checkpoint_dir"] = args.checkpoint_dir
    cfg = load_train_config(args.config, **overrides)
    path = run_training(cfg, resume=args.resume)
    print(path)
    return 0


# -- depth evaluation --------------------------------------------------------------------
def load_depth(path) -> np.ndarray:
    """``.npy`` float depth, or a 16-bit PNG storing depth * 256 (0 = no measurement)."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path).astype(np.float64).squeeze()
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 256.0


def _depth_files(d):
    d = Path(d)
    if not d.is_dir():
        raise IngestionError(f"not a directory: {d}")
    return {p.stem: p for p in sorted(d.iterdir()) if p.suffix in (".npy", ".png")}


def _resize_to(pred, shape):
    if pred.shape == shape:
        return pred
    import torch
    import torch.nn.functional as F

    t = torch.from_numpy(pred)[None, None]
    return F.interpolate(t, size=shape, mode="bilinear", align_corners=False)[0, 0].numpy()


def cmd_eval_depth(args):
    from .evaluation import DepthMetrics, depth_metrics, write_metrics_csv

    preds, gts = _depth_files(args.pred), _depth_files(args.gt)
    names = sorted(set(preds) & set(gts))
    if not names:
        raise IngestionError(f"no matching depth files between {args.pred} and {args.gt}")
    per_frame = {}
    for name in names:
        gt = load_depth(gts[name])
        pred = _resize_to(load_depth(preds[name]), gt.shape)
        try:
            per_frame[name] = depth_metrics(pred, gt, cap=args.cap, median_scale=not args.no_median_scale)
        except EmptyGroundTruthError:
            log.warning("skipping %s: no valid ground truth", name)
    if not per_frame:
        raise EmptyGroundTruthError("no frame had valid ground truth")
    mean = DepthMetrics(*np.mean([m.as_tuple() for m in per_frame.values()], axis=0))
    out = Path(args.out)
    write_metrics_csv(out / "depth_metrics.csv", {**per_frame, "mean": mean})
    _plot_depth_errors(out / "depth_abs_rel.png", per_frame)
    print(",".join(("name",) + DepthMetrics.columns()))
    print(",".join(["mean"] + [f"{v:.4f}" for v in mean.as_tuple()]))
    return 0


def _plot_depth_errors(path, per_frame):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot([m.abs_rel for m in per_frame.values()], marker=".")
    ax.set_xlabel("frame")
    ax.set_ylabel("abs rel")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


# -- odometry evaluation -----------------------------------------------------------------
def cmd_eval_odometry(args):
    from .data import load_gt_poses
    from .evaluation import ate, emit_report

    pred = load_gt_poses(args.pred)
    gt = load_gt_poses(args.gt)
    value = ate(pred, gt, snippet_len=args.snippet)
    emit_report({}, {"pred": pred, "gt": gt}, args.out, ate_values={Path(args.pred).stem: value})
    print(f"ate {value:.6f}")
    return 0


# -- inference ---------------------------------------------------------------------------
def cmd_infer(args):
    from .data import SequenceSample, load_image, parse_intrinsics, synth_scene, load_synth_config
    from .data.kitti import list_frames
    from .flow import OnTheFlyFlow
    from .inference import load_model, predict_sequence, save_prediction

    model, cfg = load_model(args.checkpoint)
    size = (cfg.height, cfg.width)
    if args.synth is not None:
        seq = synth_scene(load_synth_config(args.synth))
    else:
        seq_dir = Path(args.sequence)
        files = list_frames(seq_dir)
        if not files:
            raise IngestionError(f"no images in {seq_dir}")
        full = [load_image(f) for f in files]
        K = parse_intrinsics(seq_dir / "calib.txt", (full[0].shape[1], full[0].shape[0]))
        seq = SequenceSample(frames=np.stack(full), intrinsics=K, seq_id=seq_dir.name)
    seq = seq.with_flows(OnTheFlyFlow(cache_dir=args.flow_cache))
    pred = predict_sequence(model, seq, size, cfg.sequence_length)
    files = save_prediction(pred, args.out)
    print(files["trajectory"])
    return 0


# -- synthetic data ----------------------------------------------------------------------
def cmd_synth(args):
    """Render a synthetic scene as a KITTI-style tree (images, calib, poses, depth)."""
    from PIL import Image

    from .data import SynthConfig, load_synth_config, save_poses, synth_scene

    cfg = load_synth_config(args.config) if args.config else SynthConfig()
    scene = synth_scene(cfg)
    root = Path(args.out)
    seq_dir = root / "sequences" / args.sequence
    img_dir = seq_dir / "image_2"
    depth_dir = seq_dir / "depth"
    img_dir.mkdir(parents=True, exist_ok=True)
    depth_dir.mkdir(parents=True, exist_ok=True)
    for i, (f, d) in enumerate(zip(scene.frames, scene.gt_depth)):
        Image.fromarray((np.clip(f, 0, 1) * 255).round().astype(np.uint8)).save(img_dir / f"{i:06d}.png")
        np.save(depth_dir / f"{i:06d}.npy", d.astype(np.float32))
    K = cfg.intrinsics
    row = [K.fx, 0, K.cx, 0, 0, K.fy, K.cy, 0, 0, 0, 1, 0]
    (seq_dir / "calib.txt").write_text("P2: " + " ".join(f"{v:.12e}" for v in row) + "\n")
    save_poses(root / "poses" / f"{args.sequence}.txt", scene.gt_poses)
    print(seq_dir)
    return 0


# -- wiring ------------------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="seqvo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from a key-value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--gan", choices=("none", "wgan", "patchgan"))
    t.add_argument("--no-lstm", action="store_true")
    t.add_argument("--no-tc", action="store_true", help="disable the trajectory consistency loss")
    t.add_argument("--seed", type=int)
    t.add_argument("--resume", metavar="CKPT")
    t.add_argument("--max-steps", type=int)
    t.add_argument("--checkpoint-dir")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("eval-depth", help="depth metrics over matching .npy/.png files")
    d.add_argument("--pred", required=True)
    d.add_argument("--gt", required=True)
    d.add_argument("--cap", type=float, default=80.0)
    d.add_argument("--no-median-scale", action="store_true")
    d.add_argument("--out", default="eval_depth")
    d.set_defaults(func=cmd_eval_depth)

    o = sub.add_parser("eval-odometry", help="snippet ATE between two KITTI-format pose files")
    o.add_argument("--pred", required=True)
    o.add_argument("--gt", required=True)
    o.add_argument("--snippet", type=int, default=5)
    o.add_argument("--out", default="eval_odometry")
    o.set_defaults(func=cmd_eval_odometry)

    i = sub.add_parser("infer", help="predict depth and trajectory for one sequence")
    i.add_argument("--checkpoint", required=True)
    src = i.add_mutually_exclusive_group(required=True)
    src.add_argument("--sequence", help="directory with image_2/ and calib.txt")
    src.add_argument("--synth", help="synthetic scene config file")
    i.add_argument("--flow-cache")
    i.add_argument("--out", default="pred")
    i.set_defaults(func=cmd_infer)

    s = sub.add_parser("synth", help="write a synthetic scene as a KITTI-style tree")
    s.add_argument("--config")
    s.add_argument("--sequence", default="00")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, IngestionError, EmptyGroundTruthError, NonFiniteLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
