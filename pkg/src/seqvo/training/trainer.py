"""Joint optimisation of the generator networks against an optional discriminator."""

from __future__ import annotations

import contextlib
import csv
import logging
import math
import random
from pathlib import Path

import numpy as np
import torch

from .. import losses as L
from ..data import KittiWindows, SceneWindows, load_synth_config, scan_dataset, synth_scene
from ..data.synthetic import SynthConfig
from ..errors import ConfigError, NonFiniteLossError
from ..flow import OnTheFlyFlow, PrecomputedFlow
from ..nets import PatchDiscriminator, WGANCritic, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .model import Batch, SeqVOModel, collate, synthesis_terms

log = logging.getLogger(__name__)


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _check_finite(terms: dict, step):
    for name, value in terms.items():
        v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(v):
            raise NonFiniteLossError(name, v, step)


@contextlib.contextmanager
def _frozen(module):
    """Use ``module`` in a generator pass without touching its weights or BN statistics."""
    norms = [m for m in module.modules() if isinstance(m, torch.nn.modules.batchnorm._BatchNorm)]
    saved = [(m.momentum, m.num_batches_tracked.clone()) for m in norms]
    for m in norms:
        m.momentum = 0.0  # running stats stay exactly as they are
    for p in module.parameters():
        p.requires_grad_(False)
    try:
        yield module
    finally:
        for p in module.parameters():
            p.requires_grad_(True)
        for m, (momentum, tracked) in zip(norms, saved):
            m.momentum = momentum
            m.num_batches_tracked.copy_(tracked)


class Trainer:
    """Owns the networks, their optimizers and the step counter."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        seed_everything(cfg.seed)
        self.model = SeqVOModel(
            use_lstm=cfg.use_lstm, disp_alpha=cfg.disp_alpha, disp_beta=cfg.disp_beta,
            pose_scale=cfg.pose_scale,
        )
        self.gen_optimizer = torch.optim.Adam(
            self.model.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2)
        )
        self.disc = None
        self.disc_optimizer = None
        if cfg.gan == "wgan":
            self.disc = WGANCritic()
            self.disc.clip_weights(cfg.clip)
            self.disc_optimizer = torch.optim.SGD(self.disc.parameters(), lr=cfg.wgan_lr)
        elif cfg.gan == "patchgan":
            self.disc = PatchDiscriminator()
            self.disc_optimizer = torch.optim.Adam(
                self.disc.parameters(), lr=cfg.patchgan_lr, betas=(0.5, 0.999)
            )
        self.step = 0
        self._last_fake = None

    # -- bookkeeping -----------------------------------------------------------------
    def modules(self) -> dict:
        mods = dict(self.model.groups())
        if self.disc is not None:
            mods["disc"] = self.disc
        return mods

    def optimizers(self) -> dict:
        opts = {"generator": self.gen_optimizer}
        if self.disc_optimizer is not None:
            opts["discriminator"] = self.disc_optimizer
        return opts

    def save(self, path) -> Path:
        return save_checkpoint(path, self.cfg.arch(), self.modules(), self.optimizers(), self.step,
                               extra={"config": self.cfg.to_text()})

    def load(self, path):
        payload = load_checkpoint(path, self.cfg.arch(), self.modules(), self.optimizers())
        self.step = payload["step"]
        return payload

    def effective_weights(self) -> L.LossWeights:
        w = self.cfg.weights
        if not self.cfg.use_trajectory_loss:
            return L.LossWeights(w.appearance, w.smoothness, 0.0, w.gan if self.disc else 0.0)
        ramp = 1.0
        if self.cfg.tc_warmup_steps > 0:
            ramp = min(1.0, (self.step + 1) / self.cfg.tc_warmup_steps)
        return L.LossWeights(w.appearance, w.smoothness, w.trajectory * ramp, w.gan if self.disc else 0.0)

    # -- steps -----------------------------------------------------------------------
    def compute_losses(self, batch: Batch) -> tuple[L.LossReport, dict]:
        cfg = self.cfg
        out = self.model(batch)
        # a diverged network shows up here before any loss can be formed
        for name, value in (("disparity", out["disps"][0]), ("pose", out["poses"])):
            if not torch.isfinite(value).all():
                raise NonFiniteLossError(name, float("nan"), self.step)
        n = batch.size if cfg.ssim_divide_by_batch else 1
        syn = synthesis_terms(out, cfg.ssim_alpha, n)
        smo = L.multiscale_smoothness(out["disps"], out["tgt"])

        zero = syn["ap"].new_zeros(())
        tc = zero
        if cfg.use_trajectory_loss:
            relative = self.model.single_step_poses(out, batch.size)
            direct = self.model.direct_poses(batch.frames)
            tc = L.trajectory_loss(direct, relative)

        gan_g = zero
        fake = torch.cat(syn["views"], 0)
        if self.disc is not None:
            cond = out["tgt"].repeat(len(syn["views"]), 1, 1, 1)
            with _frozen(self.disc):
                fake_scores = self.disc(fake, cond)
            gan_g, _ = L.gan_losses(cfg.gan, None, fake_scores)

        terms = {"pho": syn["pho"], "ssim": syn["ssim"], "reg": syn["reg"], "smo": smo, "tc": tc, "gan_g": gan_g}
        _check_finite(terms, self.step)
        report = L.total_loss(syn["ap"], smo, tc, gan_g, self.effective_weights(),
                              pho=syn["pho"], ssim=syn["ssim"], reg=syn["reg"])
        _check_finite({"total": report.tensor}, self.step)
        return report, {"out": out, "synthesis": syn, "fake": fake.detach()}

    def generator_step(self, batch: Batch) -> L.LossReport:
        """One forward pass and one Adam update of the generator networks."""
        self.model.train()
        report, aux = self.compute_losses(batch)
        self.gen_optimizer.zero_grad(set_to_none=True)
        report.tensor.backward()
        self.gen_optimizer.step()
        self._last_fake = (aux["out"]["tgt"].detach(), aux["fake"])
        self.step += 1
        return report

    def discriminator_step(self, real, fake, condition=None) -> float:
        """One discriminator update on detached fakes; WGAN weights are clipped afterwards."""
        if self.disc is None:
            raise ConfigError("discriminator_step needs gan = wgan or patchgan")
        self.disc.train()
        real = real.detach()
        fake = fake.detach()
        if condition is None:
            condition = real
        condition = condition.detach()
        reps = fake.shape[0] // real.shape[0]
        real_scores = self.disc(real, condition)
        fake_scores = self.disc(fake, condition.repeat(reps, 1, 1, 1))
        _, d_loss = L.gan_losses(self.cfg.gan, real_scores, fake_scores)
        _check_finite({"gan_d": d_loss}, self.step)
        self.disc_optimizer.zero_grad(set_to_none=True)
        d_loss.backward()
        self.disc_optimizer.step()
        if self.cfg.gan == "wgan":
            self.disc.clip_weights(self.cfg.clip)
        return float(d_loss.detach())

    def train_step(self, batch: Batch) -> L.LossReport:
        """Generator step followed by ``critic_steps`` discriminator steps."""
        report = self.generator_step(batch)
        if self.disc is not None:
            real, fake = self._last_fake
            for _ in range(self.cfg.critic_steps):
                report.gan_d = self.discriminator_step(real, fake)
        return report


# -- data ------------------------------------------------------------------------------
def build_dataset(cfg: TrainConfig):
    if cfg.precomputed_flow:
        if not cfg.flow_cache:
            raise ConfigError("precomputed_flow needs flow_cache")
        provider = PrecomputedFlow(cfg.flow_cache)
    else:
        provider = OnTheFlyFlow(cache_dir=cfg.flow_cache or None)
    if cfg.dataset == "synthetic":
        scfg = load_synth_config(cfg.synth_config) if cfg.synth_config else SynthConfig()
        return SceneWindows(synth_scene(scfg), cfg.sequence_length, cfg.window_stride, provider)
    index = scan_dataset(cfg.dataset_root, cfg.split, cfg.sequence_length, cfg.window_stride)
    return KittiWindows(cfg.dataset_root, index, (cfg.width, cfg.height), provider)


class CSVLog:
    def __init__(self, path, append=False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fresh = not (append and self.path.exists())
        self._f = open(self.path, "w" if fresh else "a", newline="")
        self._w = csv.writer(self._f)
        if fresh:
            self._w.writerow(L.LossReport.CSV_COLUMNS)

    def write(self, step, report: L.LossReport):
        self._w.writerow(report.csv_row(step))
        self._f.flush()

    def close(self):
        self._f.close()


def run_training(cfg: TrainConfig, resume=None, dataset=None, callback=None) -> Path:
    """Train for ``cfg.epochs`` (capped by ``cfg.max_steps``); returns the final checkpoint path."""
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    (ckpt_dir / "config.txt").write_text(cfg.to_text())
    trainer = Trainer(cfg)
    last = ckpt_dir / "last.pt"
    if resume is not None:
        trainer.load(resume)
        log.info("resumed from %s at step %d", resume, trainer.step)
    else:
        trainer.save(ckpt_dir / "init.pt")
    if cfg.epochs == 0:
        return ckpt_dir / "init.pt" if resume is None else Path(resume)

    data = dataset if dataset is not None else build_dataset(cfg)
    if len(data) == 0:
        raise ConfigError("dataset has no windows")
    logger = CSVLog(ckpt_dir / "losses.csv", append=resume is not None)
    rng = np.random.default_rng(cfg.seed + trainer.step)
    size = (cfg.height, cfg.width)
    final = ckpt_dir / "init.pt" if resume is None else Path(resume)
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(data))
            for b in range(0, len(order), cfg.batch_size):
                if cfg.max_steps and trainer.step >= cfg.max_steps:
                    break
                batch = collate([data[int(i)] for i in order[b:b + cfg.batch_size]], size)
                report = trainer.train_step(batch)
                logger.write(trainer.step, report)
                if callback is not None:
                    callback(trainer, report)
                if cfg.log_every and trainer.step % cfg.log_every == 0:
                    log.info("epoch %d step %d total %.5f pho %.5f", epoch, trainer.step, report.total, report.pho)
                if cfg.checkpoint_every and trainer.step % cfg.checkpoint_every == 0:
                    final = trainer.save(last)
            if cfg.max_steps and trainer.step >= cfg.max_steps:
                break
    except NonFiniteLossError:
        log.error("aborting at step %d; last good checkpoint: %s", trainer.step, final)
        raise
    finally:
        logger.close()
    return trainer.save(last)
