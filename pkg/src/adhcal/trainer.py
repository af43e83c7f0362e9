"""Interleaved training of the main and calibration heads.

Each epoch walks the shuffled training set in ``s`` batches. Every batch takes
one SGD step on the main head; after every ``k``-th step (``t % k == 0``, with
``t`` counted from 1 inside the epoch) the calibration head takes one step on
a batch drawn with replacement from the calibration set. The annealing factor
for that step is ``beta0 - (beta0 - 1) * t / s``.

Note that ``t`` restarts every epoch, so the annealing factor jumps back to
``beta0`` at the start of each epoch rather than decaying once over the run.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .data import ConfigError, LabeledDataset, noise_sigma
from .doublehead import DoubleHeadModel, calib_loss_and_grads, main_logits
from .losses import LossKind, loss_and_grad, softmax
from .metrics import PredictionRecords, summarize


class TrainingDiverged(RuntimeError):
    """Parameters became non-finite during training."""


@dataclass(frozen=True)
class AnnealSchedule:
    beta0: float
    steps_per_epoch: int

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be at least 1")


def beta_at(sched: AnnealSchedule, t: int) -> float:
    s = sched.steps_per_epoch
    if not 0 <= t <= s:
        raise ValueError(f"step {t} outside [0, {s}]")
    if t == s:
        return 1.0
    return sched.beta0 - (sched.beta0 - 1.0) * t / s


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    calib_batch_size: int | None = None       # defaults to batch_size
    calib_period: int | None = 5              # None: never train the calibration head
    lr_main: float = 0.01
    lr_calib: float | None = None             # defaults to lr_ratio * lr_main
    lr_ratio: float = 100.0
    momentum: float = 0.9
    weight_decay_main: float = 5e-4
    weight_decay_calib: float = 5e-5
    schedule: str = "cosine"                  # cosine | multistep | constant
    milestones: tuple = ()                    # in epochs, for multistep
    lr_factor: float = 0.1
    loss_main: str = "ce"
    loss_calib: str = "adh"
    focal_gamma: float = 3.0
    beta0: float = 1.2
    beta_placement: str = "output"            # output: scale head logits; input: scale main logits
    augment_severity: int | None = None
    augment_prob: float = 0.5
    noise_scale: float = 0.1
    n_bins: int = 15
    eval_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.calib_period is not None and self.calib_period < 1:
            raise ConfigError("calib_period must be a positive integer")
        if self.beta_placement not in ("output", "input"):
            raise ConfigError("beta_placement must be 'output' or 'input'")
        if self.augment_severity is not None:
            noise_sigma(self.augment_severity, self.noise_scale)
        if not 0.0 <= self.augment_prob <= 1.0:
            raise ConfigError("augment_prob must lie in [0, 1]")

    @property
    def effective_lr_calib(self) -> float:
        return self.lr_calib if self.lr_calib is not None else self.lr_ratio * self.lr_main

    def main_loss(self) -> LossKind:
        return LossKind(self.loss_main, gamma=self.focal_gamma)

    def calib_loss(self) -> LossKind:
        return LossKind(self.loss_calib, gamma=self.focal_gamma)


@dataclass
class EpochLog:
    epoch: int
    train_loss_main: float
    train_loss_calib: float | None
    n_main_steps: int
    n_calib_steps: int
    main_ns: int
    calib_ns: int
    main: dict = field(default_factory=dict)
    calib: dict = field(default_factory=dict)
    betas: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def steps_per_epoch(n_train: int, batch_size: int) -> int:
    return math.ceil(n_train / batch_size)


def _schedule(cfg: TrainConfig, s: int) -> nn.Schedule:
    total = max(cfg.epochs * s, 1)
    if cfg.schedule == "cosine":
        return nn.Schedule("cosine", total_steps=total)
    if cfg.schedule == "multistep":
        return nn.Schedule("multistep", milestones=tuple(m * s for m in cfg.milestones),
                           factor=cfg.lr_factor)
    if cfg.schedule == "constant":
        return nn.Schedule("constant")
    raise ConfigError(f"unknown schedule {cfg.schedule!r}")


def evaluate(model: DoubleHeadModel, data: LabeledDataset, n_bins: int = 15):
    """Metric summaries ``(main, calib)`` on ``data``, calibration head at beta 1."""
    z = main_logits(model, data.features)
    h = nn.predict_logits(model.calib, z)
    main = summarize(PredictionRecords(softmax(z), data.labels), n_bins)
    calib = summarize(PredictionRecords(softmax(h), data.labels), n_bins)
    return main, calib


def train(model: DoubleHeadModel, train_set: LabeledDataset, calib_set: LabeledDataset,
          cfg: TrainConfig, test_set: LabeledDataset | None = None):
    """Train ``model`` in place; returns ``(model, [EpochLog, ...])``."""
    if len(calib_set) == 0:
        raise ConfigError("calibration set is empty")
    logs: list[EpochLog] = []
    if cfg.epochs == 0:
        return model, logs

    s = steps_per_epoch(len(train_set), cfg.batch_size)
    sched = AnnealSchedule(cfg.beta0, s)
    lr_sched = _schedule(cfg, s)
    opt_main = nn.OptimizerState(cfg.lr_main, cfg.momentum, cfg.weight_decay_main, lr_sched)
    opt_calib = nn.OptimizerState(cfg.effective_lr_calib, cfg.momentum,
                                  cfg.weight_decay_calib, lr_sched)
    main_loss = cfg.main_loss()
    calib_loss = cfg.calib_loss()
    calib_bs = cfg.calib_batch_size or cfg.batch_size
    # independent streams: the main-head trajectory does not depend on calibration settings
    ss_shuffle, ss_calib, ss_aug = np.random.SeedSequence(cfg.seed).spawn(3)
    rng_shuffle = np.random.default_rng(ss_shuffle)
    rng_calib = np.random.default_rng(ss_calib)
    rng_aug = np.random.default_rng(ss_aug)
    train_std = train_set.features.std(axis=0)
    x_train, y_train = train_set.features, train_set.labels
    x_cal, y_cal = calib_set.features, calib_set.labels

    global_step = 0
    for epoch in range(cfg.epochs):
        perm = rng_shuffle.permutation(len(train_set))
        main_ns = calib_ns = 0
        main_losses, calib_losses, betas = [], [], []
        for t in range(1, s + 1):
            t0 = time.perf_counter_ns()
            idx = perm[(t - 1) * cfg.batch_size:t * cfg.batch_size]
            z, cache = nn.forward(model.main, x_train[idx])
            value, g = loss_and_grad(main_loss, z, y_train[idx])
            nn.sgd_step(model.main, nn.backward(model.main, cache, g), opt_main, global_step)
            main_losses.append(value)
            t1 = time.perf_counter_ns()
            main_ns += t1 - t0

            if cfg.calib_period is not None and t % cfg.calib_period == 0:
                beta = beta_at(sched, t)
                cidx = rng_calib.integers(0, len(calib_set), size=calib_bs)
                xc = x_cal[cidx]
                if cfg.augment_severity is not None and rng_aug.random() < cfg.augment_prob:
                    sigma = noise_sigma(cfg.augment_severity, cfg.noise_scale)
                    xc = xc + sigma * train_std * rng_aug.standard_normal(xc.shape)
                if cfg.beta_placement == "output":
                    kind, in_beta = calib_loss.with_beta(beta), 1.0
                else:
                    kind, in_beta = calib_loss, beta
                value, grads, _ = calib_loss_and_grads(model, xc, y_cal[cidx], kind, in_beta)
                nn.sgd_step(model.calib, grads, opt_calib, global_step)
                calib_losses.append(value)
                betas.append(beta)
                calib_ns += time.perf_counter_ns() - t1
            global_step += 1

        for name, net in (("main", model.main), ("calibration", model.calib)):
            if not net.is_finite():
                raise TrainingDiverged(f"{name} head parameters are non-finite after epoch "
                                       f"{epoch + 1}; lower its learning rate")
        log = EpochLog(
            epoch=epoch + 1,
            train_loss_main=float(np.mean(main_losses)),
            train_loss_calib=float(np.mean(calib_losses)) if calib_losses else None,
            n_main_steps=s,
            n_calib_steps=len(calib_losses),
            main_ns=main_ns,
            calib_ns=calib_ns,
            betas=betas,
        )
        if test_set is not None and ((epoch + 1) % cfg.eval_every == 0 or epoch + 1 == cfg.epochs):
            log.main, log.calib = evaluate(model, test_set, cfg.n_bins)
        logs.append(log)
    return model, logs


def overhead_fraction(logs) -> float:
    """Calibration-step wall clock over main-step wall clock for a run."""
    main = sum(l.main_ns for l in logs)
    calib = sum(l.calib_ns for l in logs)
    if main == 0:
        return 0.0
    return calib / main
