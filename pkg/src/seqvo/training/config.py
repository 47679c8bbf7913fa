from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ConfigError
from ..kvconfig import from_kv, read_kv, to_kv
from ..losses import GAN_VARIANTS, SSIM_WINDOW, LossWeights


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs.  Values not fixed by the method are marked below."""

    # data
    dataset: str = "kitti"  # "kitti" | "synthetic"
    dataset_root: str = ""
    synth_config: str = ""  # key-value SynthConfig file, empty for defaults
    split: str = "train"
    height: int = 128  # network input resolution (not fixed by the method)
    width: int = 416
    sequence_length: int = 15
    window_stride: int = 1
    flow_cache: str = ""
    precomputed_flow: bool = False

    # model / ablations
    gan: str = "patchgan"  # "none" | "wgan" | "patchgan"
    use_lstm: bool = True
    use_trajectory_loss: bool = True
    disp_alpha: float = 10.0
    disp_beta: float = 0.01
    pose_scale: float = 0.01

    # losses
    w_appearance: float = 0.75
    w_smoothness: float = 0.1
    w_trajectory: float = 0.14
    w_gan: float = 0.01
    ssim_alpha: float = 0.85
    ssim_divide_by_batch: bool = True
    tc_warmup_steps: int = 1000

    # optimisation (defaults below are not given by the method)
    lr: float = 2e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    wgan_lr: float = 5e-5
    patchgan_lr: float = 2e-4
    clip: float = 0.01
    critic_steps: int = 1
    batch_size: int = 1
    epochs: int = 1
    max_steps: int = 0  # 0 = no cap
    seed: int = 0

    # bookkeeping
    checkpoint_dir: str = "checkpoints"
    checkpoint_every: int = 1000
    log_every: int = 10

    def __post_init__(self):
        if self.gan not in GAN_VARIANTS:
            raise ConfigError(f"gan must be one of {GAN_VARIANTS}, got '{self.gan}'")
        if self.dataset not in ("kitti", "synthetic"):
            raise ConfigError(f"unknown dataset '{self.dataset}'")
        for name in ("lr", "wgan_lr", "patchgan_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.height % 8 or self.width % 8:
            raise ConfigError("height and width must be divisible by 8")
        if min(self.height, self.width) // 8 < SSIM_WINDOW:
            raise ConfigError(f"height and width must be at least {8 * SSIM_WINDOW} (SSIM window at 1/8 scale)")
        if self.sequence_length < 3:
            raise ConfigError("sequence_length must be at least 3")
        if self.use_trajectory_loss and self.sequence_length < 9:
            raise ConfigError("trajectory loss needs sequence_length >= 9")
        if self.batch_size < 1 or self.critic_steps < 1:
            raise ConfigError("batch_size and critic_steps must be >= 1")
        LossWeights(self.w_appearance, self.w_smoothness, self.w_trajectory, self.w_gan)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.w_appearance, self.w_smoothness, self.w_trajectory, self.w_gan)

    def arch(self) -> dict:
        """Architecture echo stored in checkpoints."""
        return {
            "height": self.height,
            "width": self.width,
            "n_sources": 2,
            "code_dim": 128,
            "use_lstm": self.use_lstm,
            "gan": self.gan,
            "disp_alpha": self.disp_alpha,
            "disp_beta": self.disp_beta,
            "pose_scale": self.pose_scale,
        }

    def updated(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        return to_kv(self)


def load_train_config(path, **overrides) -> TrainConfig:
    values = read_kv(path)
    cfg = from_kv(TrainConfig, values)
    return replace(cfg, **overrides) if overrides else cfg
