import csv

import numpy as np
import pytest

from seqvo.cli import build_parser, load_depth, main
from seqvo.data import SynthConfig, load_gt_poses, save_poses
from seqvo.evaluation import accumulate_trajectory
from seqvo.inference import load_model
from seqvo.kvconfig import parse_kv


def test_parser_train_flags():
    a = build_parser().parse_args(["train", "--config", "c.cfg", "--gan", "wgan", "--no-lstm", "--no-tc",
                                   "--seed", "3", "--resume", "x.pt"])
    assert (a.gan, a.no_lstm, a.no_tc, a.seed, a.resume) == ("wgan", True, True, 3, "x.pt")
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--config", "c.cfg", "--gan", "lsgan"])


def test_parse_kv():
    assert parse_kv("a = 1\n# c\nb: x y\n") == {"a": "1", "b": "x y"}


def test_eval_depth(tmp_path, capsys):
    rng = np.random.default_rng(0)
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt").mkdir()
    for i in range(3):
        gt = rng.integers(1, 60, (6, 8)).astype(float)
        np.save(tmp_path / "gt" / f"{i:06d}.npy", gt)
        np.save(tmp_path / "pred" / f"{i:06d}.npy", 2.0 * gt)
    out = tmp_path / "out"
    assert main(["eval-depth", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "depth_metrics.csv")))
    assert rows[-1][0] == "mean" and float(rows[-1][2]) == pytest.approx(0.0, abs=1e-9)
    assert (out / "depth_abs_rel.png").stat().st_size > 0
    assert main(["eval-depth", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(out), "--no-median-scale"]) == 0
    rows = list(csv.reader(open(out / "depth_metrics.csv")))
    assert float(rows[-1][2]) == pytest.approx(1.0, abs=1e-6)


def test_eval_depth_png_and_resize(tmp_path):
    from PIL import Image

    gt = np.full((8, 12), 10.0)
    gt[0] = 0
    (tmp_path / "gt").mkdir()
    (tmp_path / "pred").mkdir()
    Image.fromarray((gt * 256).astype(np.uint16)).save(tmp_path / "gt" / "a.png")
    assert np.array_equal(load_depth(tmp_path / "gt" / "a.png"), gt)
    np.save(tmp_path / "pred" / "a.npy", np.full((4, 6), 5.0))
    assert main(["eval-depth", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "o"), "--no-median-scale"]) == 0
    rows = list(csv.reader(open(tmp_path / "o" / "depth_metrics.csv")))
    assert float(rows[-1][2]) == pytest.approx(0.5)


def test_eval_depth_no_match(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    assert main(["eval-depth", "--pred", str(tmp_path / "a"), "--gt", str(tmp_path / "b")]) == 2
    assert "no matching" in capsys.readouterr().err


def test_eval_odometry(tmp_path, capsys):
    rng = np.random.default_rng(1)
    rel = np.concatenate([rng.normal(size=(9, 3)), rng.uniform(-0.2, 0.2, (9, 3))], 1)
    gt = accumulate_trajectory(rel)
    save_poses(tmp_path / "gt.txt", gt)
    rel[:, :3] *= 3.0
    save_poses(tmp_path / "pred.txt", accumulate_trajectory(rel))
    out = tmp_path / "o"
    assert main(["eval-odometry", "--pred", str(tmp_path / "pred.txt"), "--gt", str(tmp_path / "gt.txt"),
                 "--out", str(out)]) == 0
    assert float(capsys.readouterr().out.split()[-1]) == pytest.approx(0.0, abs=1e-6)
    assert (out / "ate.csv").exists() and (out / "trajectories.png").exists()


def test_eval_odometry_parse_error(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("1 2 3\n")
    assert main(["eval-odometry", "--pred", str(tmp_path / "p.txt"), "--gt", str(tmp_path / "p.txt")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_synth_train_infer(tmp_path, capsys):
    scene_cfg = tmp_path / "scene.cfg"
    scene_cfg.write_text("width = 80\nheight = 80\ncx = 39.5\ncy = 39.5\nframes = 8\nmotion = 0.1, 0, 0.05, 0, 0, 0\n")
    assert main(["synth", "--config", str(scene_cfg), "--out", str(tmp_path / "kitti")]) == 0
    seq_dir = tmp_path / "kitti" / "sequences" / "00"
    assert len(list((seq_dir / "image_2").glob("*.png"))) == 8
    assert load_gt_poses(tmp_path / "kitti" / "poses" / "00.txt").shape == (8, 4, 4)

    train_cfg = tmp_path / "train.cfg"
    train_cfg.write_text(
        f"dataset = kitti\ndataset_root = {tmp_path / 'kitti'}\nsplit = 00\nheight = 80\nwidth = 80\n"
        f"sequence_length = 5\nuse_trajectory_loss = false\ncheckpoint_dir = {tmp_path / 'run'}\n"
        "checkpoint_every = 0\nlog_every = 0\n"
    )
    assert main(["train", "--config", str(train_cfg), "--gan", "none", "--max-steps", "2"]) == 0
    ckpt = tmp_path / "run" / "last.pt"
    model, cfg = load_model(ckpt)
    assert cfg.gan == "none" and cfg.sequence_length == 5 and not model.training

    assert main(["train", "--config", str(train_cfg), "--gan", "none", "--max-steps", "3", "--resume", str(ckpt)]) == 0
    rows = (tmp_path / "run" / "losses.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["1", "2", "3"]

    out = tmp_path / "pred"
    assert main(["infer", "--checkpoint", str(ckpt), "--sequence", str(seq_dir), "--out", str(out)]) == 0
    traj = load_gt_poses(out / "pred.txt")
    assert traj.shape == (8, 4, 4) and np.allclose(traj[0], np.eye(4))
    depths = sorted((out / "depth").glob("*.npy"))
    assert len(depths) == 8 and all(np.all(np.load(d) > 0) for d in depths)

    capsys.readouterr()
    assert main(["eval-odometry", "--pred", str(out / "pred.txt"),
                 "--gt", str(tmp_path / "kitti" / "poses" / "00.txt"), "--out", str(tmp_path / "e")]) == 0
    assert np.isfinite(float(capsys.readouterr().out.split()[-1]))
