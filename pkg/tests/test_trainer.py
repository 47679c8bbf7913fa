import hashlib

import numpy as np
import pytest
import torch

from seqvo.data import SceneWindows, SynthConfig, synth_scene
from seqvo.errors import ConfigError, NonFiniteLossError
from seqvo.geometry import transform_to_pose_vec
from seqvo.nets.checkpoint import read_checkpoint
from seqvo.training import Trainer, TrainConfig, collate, load_train_config, run_training, synthesis_terms
from seqvo.training.model import N_SCALES

H = W = 80


def small_cfg(**kw):
    base = dict(dataset="synthetic", height=H, width=W, sequence_length=9, gan="none",
                use_trajectory_loss=False, seed=0, log_every=0, checkpoint_every=0)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def scene():
    return synth_scene(SynthConfig(width=W, height=H, cx=39.5, cy=39.5, frames=12,
                                   motion=(0.05, 0.0, 0.1, 0.0, 0.0, 0.0)))


@pytest.fixture(scope="module")
def windows(scene):
    return SceneWindows(scene, 9)


@pytest.fixture(scope="module")
def batch(windows):
    return collate([windows[0]], (H, W))


def param_hash(module):
    h = hashlib.sha256()
    for p in module.state_dict().values():
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(gan="lsgan")
        with pytest.raises(ConfigError):
            TrainConfig(lr=0)
        with pytest.raises(ConfigError):
            TrainConfig(height=100)
        with pytest.raises(ConfigError):
            TrainConfig(height=72, width=416)
        with pytest.raises(ConfigError):
            TrainConfig(sequence_length=5)
        TrainConfig(sequence_length=5, use_trajectory_loss=False)

    def test_file_roundtrip(self, tmp_path):
        cfg = small_cfg(gan="wgan", lr=1e-3)
        p = tmp_path / "c.cfg"
        p.write_text(cfg.to_text())
        assert load_train_config(p) == cfg
        assert load_train_config(p, seed=3).seed == 3

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("learning_rate = 1\n")
        with pytest.raises(ConfigError):
            load_train_config(p)


class TestGeneratorStep:
    def test_toggles_off(self, batch):
        r = Trainer(small_cfg()).generator_step(batch)
        assert r.gan_g == 0.0 and r.tc == 0.0 and r.gan_d == 0.0
        assert r.pho > 0 and r.ssim > 0 and r.reg > 0 and r.smo > 0

    def test_determinism(self, batch):
        a = Trainer(small_cfg(gan="patchgan", use_trajectory_loss=True)).generator_step(batch)
        b = Trainer(small_cfg(gan="patchgan", use_trajectory_loss=True)).generator_step(batch)
        for k, v in a.terms().items():
            assert abs(v - b.terms()[k]) <= 1e-6, k
        assert abs(a.total - b.total) <= 1e-6

    def test_total_is_weighted_sum(self, batch):
        tr = Trainer(small_cfg(gan="patchgan", use_trajectory_loss=True, tc_warmup_steps=0))
        r = tr.generator_step(batch)
        w = r.weights
        expected = w.appearance * r.ap + w.smoothness * r.smo + w.trajectory * r.tc + w.gan * r.gan_g
        assert abs(r.total - expected) <= 1e-6

    def test_every_group_receives_gradient(self, batch):
        tr = Trainer(small_cfg(use_trajectory_loss=True, tc_warmup_steps=0, gan="wgan"))
        report, _ = tr.compute_losses(batch)
        report.tensor.backward()
        for name, module in tr.model.groups().items():
            grads = [p.grad for p in module.parameters() if p.grad is not None]
            assert grads and any(g.abs().max() > 0 for g in grads), name

    def test_trajectory_warmup(self):
        tr = Trainer(small_cfg(use_trajectory_loss=True, tc_warmup_steps=100))
        assert tr.effective_weights().trajectory == pytest.approx(0.14 / 100)
        tr.step = 49
        assert tr.effective_weights().trajectory == pytest.approx(0.14 / 2)
        tr.step = 5000
        assert tr.effective_weights().trajectory == pytest.approx(0.14)

    def test_nonfinite_aborts(self, batch):
        tr = Trainer(small_cfg())
        frames = batch.frames.clone()
        frames[0, 1, 0, 0, 0] = float("nan")
        broken = type(batch)(frames, batch.flows, batch.K)
        with pytest.raises(NonFiniteLossError) as e:
            tr.generator_step(broken)
        assert e.value.term in ("disparity", "pose")
        assert e.value.step == 0

    def test_nonfinite_term_named(self, batch, monkeypatch):
        from seqvo import losses

        tr = Trainer(small_cfg())
        monkeypatch.setattr(losses, "multiscale_smoothness", lambda d, i: torch.tensor(float("inf")))
        with pytest.raises(NonFiniteLossError) as e:
            tr.generator_step(batch)
        assert e.value.term == "smo"

    def test_ground_truth_wiring(self):
        # zero motion, saturated mask, depth and pose at ground truth
        cfg = SynthConfig(width=W, height=H, cx=39.5, cy=39.5, frames=3, motion=(0, 0, 0, 0, 0, 0))
        s = SceneWindows(synth_scene(cfg), 3)[0]
        b = collate([s], (H, W))
        pose = torch.stack([transform_to_pose_vec(torch.from_numpy(s.gt_target_to_source(1, j))) for j in (0, 2)])
        disps = [torch.full((1, 1, H >> k, W >> k), 1.0 / cfg.depth) for k in range(N_SCALES)]
        masks = [torch.ones(1, 2, H >> k, W >> k) for k in range(N_SCALES)]
        out = {"tgt": b.frames[:, 1], "sources": [b.frames[:, 0], b.frames[:, 2]], "disps": disps,
               "poses": pose[None].float(), "masks": masks, "K": b.K}
        terms = synthesis_terms(out)
        assert terms["pho"].item() <= 1e-3
        assert terms["reg"].item() <= 1e-6


class TestAblations:
    @pytest.mark.parametrize("use_lstm", [True, False])
    @pytest.mark.parametrize("gan", ["none", "wgan", "patchgan"])
    def test_parameter_groups(self, use_lstm, gan):
        tr = Trainer(small_cfg(use_lstm=use_lstm, gan=gan))
        gen_params = {id(p) for g in tr.gen_optimizer.param_groups for p in g["params"]}
        assert gen_params == {id(p) for p in tr.model.parameters()}
        assert (tr.model.lstm is not None) == use_lstm
        assert ("lstm" in tr.model.groups()) == use_lstm
        if gan == "none":
            assert tr.disc is None and tr.disc_optimizer is None
            assert tr.effective_weights().gan == 0.0
        else:
            disc_params = {id(p) for g in tr.disc_optimizer.param_groups for p in g["params"]}
            assert disc_params == {id(p) for p in tr.disc.parameters()}
            assert not disc_params & gen_params
        assert isinstance(tr.disc_optimizer, {"none": type(None), "wgan": torch.optim.SGD,
                                              "patchgan": torch.optim.Adam}[gan])


class TestDiscriminator:
    def test_none_rejected(self):
        with pytest.raises(ConfigError):
            Trainer(small_cfg()).discriminator_step(torch.rand(1, 3, H, W), torch.rand(2, 3, H, W))

    @pytest.mark.parametrize("gan", ["wgan", "patchgan"])
    def test_no_cross_contamination(self, batch, gan):
        tr = Trainer(small_cfg(gan=gan))
        disc_before = param_hash(tr.disc)
        gen_before = param_hash(tr.model)
        tr.generator_step(batch)
        assert param_hash(tr.disc) == disc_before
        gen_after = param_hash(tr.model)
        assert gen_after != gen_before
        real, fake = tr._last_fake
        tr.discriminator_step(real, fake)
        assert param_hash(tr.model) == gen_after
        assert param_hash(tr.disc) != disc_before

    def test_wgan_clipping_each_step(self):
        tr = Trainer(small_cfg(gan="wgan", wgan_lr=0.5))
        for _ in range(3):
            tr.discriminator_step(torch.rand(2, 3, H, W), torch.rand(2, 3, H, W) * 0.1)
            for p in tr.disc.parameters():
                assert p.abs().max() <= tr.cfg.clip

    def test_patchgan_separable_toy(self):
        torch.manual_seed(0)
        tr = Trainer(small_cfg(gan="patchgan"))
        g = torch.Generator().manual_seed(1)
        real = torch.linspace(0, 1, W).view(1, 1, 1, W).expand(2, 3, H, W).contiguous()
        losses = []
        for _ in range(50):
            fake = torch.rand(2, 3, H, W, generator=g)
            losses.append(tr.discriminator_step(real, fake, condition=real))
        first, last = np.mean(losses[:5]), np.mean(losses[-5:])
        assert last < first
        assert losses[-1] < losses[0]


class TestRunTraining:
    def test_zero_epochs(self, tmp_path, windows):
        path = run_training(small_cfg(epochs=0, checkpoint_dir=str(tmp_path)), dataset=windows)
        assert path.name == "init.pt"
        assert sorted(p.name for p in tmp_path.glob("*.pt")) == ["init.pt"]
        assert read_checkpoint(path)["step"] == 0

    def test_train_and_resume(self, tmp_path, windows):
        cfg = small_cfg(gan="patchgan", max_steps=2, checkpoint_dir=str(tmp_path))
        last = run_training(cfg, dataset=windows)
        p1 = read_checkpoint(last)
        assert p1["step"] == 2
        rows = (tmp_path / "losses.csv").read_text().splitlines()
        assert rows[0] == "step,pho,ssim,reg,smo,tc,gan_g,gan_d,total" and len(rows) == 3
        adam_steps = p1["optim"]["generator"]["state"][0]["step"]

        cfg2 = cfg.updated(max_steps=3)
        last2 = run_training(cfg2, resume=last, dataset=windows)
        p2 = read_checkpoint(last2)
        assert p2["step"] == 3
        assert p2["optim"]["generator"]["state"][0]["step"] == adam_steps + 1
        rows = (tmp_path / "losses.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in rows[1:]] == ["1", "2", "3"]

    def test_checkpoint_byte_identical(self, tmp_path):
        tr = Trainer(small_cfg(gan="wgan"))
        a = tr.save(tmp_path / "a.pt")
        tr2 = Trainer(small_cfg(gan="wgan", seed=5))
        tr2.load(a)
        b = tr2.save(tmp_path / "b.pt")
        pa, pb = read_checkpoint(a)["params"], read_checkpoint(b)["params"]
        assert pa.keys() == pb.keys()
        for blk in pa:
            for k in pa[blk]:
                assert pa[blk][k].numpy().tobytes() == pb[blk][k].numpy().tobytes()

    def test_arch_mismatch_on_resume(self, tmp_path):
        tr = Trainer(small_cfg(gan="wgan"))
        p = tr.save(tmp_path / "a.pt")
        with pytest.raises(ConfigError):
            Trainer(small_cfg(gan="patchgan")).load(p)
