"""One record holding every knob of a run, with profile-based defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .data import fractions_for_missing_rate
from .errors import ConfigError
from .losses import LossConfig
from .propagation import MODE_ANCHORED, MODE_FP, PropagationConfig
from .training import PROFILE_CITATION, PROFILE_LARGE, TrainConfig, _PROFILE_DEFAULTS


@dataclass(frozen=True)
class RunConfig:
    profile: str = PROFILE_CITATION
    seed: int = 72
    # propagation pre-fill
    mode: str = MODE_ANCHORED  # "fp" | "anchored"; iters=0 disables pre-fill
    iters: int = 10
    alpha_global: float = 0.05
    beta_reset: float = 0.1
    # embedding confidence
    gamma_decay: float = 0.9
    epsilon: float = 0.01
    # objective
    lambda1: float = 0.1
    lambda2: float = 0.1
    tau: float = 0.2
    sign_mode: str = "intent-consistent"
    nlsc_mode: str = "auto"
    nlsc_sample_count: int = 100_000
    recon_target: str = "refined"
    # optimizer / model (None -> profile default)
    lr: float | None = None
    epochs: int | None = None
    dropout: float | None = None
    arch: str | None = None
    hidden: int = 256
    latent: int = 256
    # split
    known_frac: float = 0.4
    missing_rate: float | None = None
    known_within_train: bool = False
    # evaluation
    k_list: tuple = (10, 20, 50)

    def resolved(self) -> "RunConfig":
        """Fill in any None field from the dataset profile."""
        if self.profile not in (PROFILE_CITATION, PROFILE_LARGE):
            raise ConfigError(f"unknown profile {self.profile!r}")
        defaults = _PROFILE_DEFAULTS[self.profile]
        updates = {}
        for name in ("lr", "epochs", "dropout", "arch"):
            if getattr(self, name) is None:
                updates[name] = defaults[name]
        return replace(self, **updates) if updates else self

    # -- views consumed by the submodules

    def propagation_config(self) -> PropagationConfig:
        return PropagationConfig(iterations=self.iters,
                                 alpha_global=self.alpha_global,
                                 beta_reset=self.beta_reset, mode=self.mode)

    def loss_config(self) -> LossConfig:
        return LossConfig(lambda1=self.lambda1, lambda2=self.lambda2,
                          tau=self.tau, sign_mode=self.sign_mode,
                          nlsc_mode=self.nlsc_mode,
                          nlsc_sample_count=self.nlsc_sample_count,
                          recon_target=self.recon_target)

    def train_config(self) -> TrainConfig:
        cfg = self.resolved()
        return TrainConfig(lr=cfg.lr, epochs=cfg.epochs, seed=cfg.seed,
                           dataset_profile=cfg.profile, dropout=cfg.dropout,
                           arch=cfg.arch, hidden=cfg.hidden, latent=cfg.latent,
                           dec_hidden=cfg.hidden)

    def split_fractions(self):
        if self.missing_rate is not None:
            return fractions_for_missing_rate(self.missing_rate)
        kf = self.known_frac
        if not 0.0 < kf < 1.0:
            raise ConfigError("known_frac must lie strictly inside (0, 1)")
        rest = 1.0 - kf
        return (kf, rest / 6.0, rest * 5.0 / 6.0)

    def echo(self) -> dict:
        d = asdict(self.resolved())
        d["k_list"] = list(d["k_list"])
        return d
