"""Classification losses with exact gradients w.r.t. the logits.

All losses accept either one logit vector with an integer label, or a batch
``[B x n]`` with a label vector. For a batch the returned loss is the mean
over samples and the gradient is that of the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSS_NAMES = ("ce", "brier", "focal", "adh")


@dataclass(frozen=True)
class LossKind:
    """A loss selector.

    ``name`` is one of ``ce``, ``brier``, ``focal`` (uses ``gamma``) or ``adh``,
    the annealed cross-entropy ``CE(beta * z, y)`` (uses ``beta``).
    """

    name: str = "ce"
    gamma: float = 3.0
    beta: float = 1.0

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.name!r}; choose from {LOSS_NAMES}")
        if self.gamma < 0:
            raise ValueError("focal gamma must be nonnegative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def with_beta(self, beta: float) -> "LossKind":
        return LossKind(self.name, self.gamma, beta)


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z) -> np.ndarray:
    # written out rather than via scipy's logsumexp, whose per-call dispatch
    # cost dominates on the small batches used here
    z = np.asarray(z, dtype=np.float64)
    s = z - z.max(axis=-1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def _ce_grad(p, y):
    # p - onehot(y), with the true-class entry summed from the others so it
    # keeps full relative precision when p_y is close to 1
    g = p.copy()
    rows = np.arange(len(y))
    p_rest = p.copy()
    p_rest[rows, y] = 0.0
    g[rows, y] = -p_rest.sum(axis=1)
    return g


def _per_sample(kind: LossKind, z, y):
    """Per-sample losses [B] and per-sample logit gradients [B x n]."""
    rows = np.arange(len(y))
    if kind.name in ("ce", "adh"):
        beta = kind.beta if kind.name == "adh" else 1.0
        zs = beta * z if beta != 1.0 else z
        logp = log_softmax(zs)
        g = _ce_grad(np.exp(logp), y)
        if beta != 1.0:
            g *= beta
        return -logp[rows, y], g
    if kind.name == "brier":
        p = softmax(z)
        r = p.copy()
        r[rows, y] -= 1.0
        loss = (r * r).sum(axis=1)
        r2 = 2.0 * r
        g = p * (r2 - (r2 * p).sum(axis=1, keepdims=True))
        return loss, g
    # focal: -(1 - p_y)^gamma log p_y
    logp = log_softmax(z)
    p = np.exp(logp)
    logp_y = logp[rows, y]
    ce_g = _ce_grad(p, y)                 # = p - onehot = -(dlog p_y / dz)
    one_minus = -ce_g[rows, y]            # 1 - p_y, accurate near p_y = 1
    gam = kind.gamma
    if gam == 0.0:
        return -logp_y, ce_g
    w = one_minus ** gam
    # dL/dlog p_y = gamma (1-p)^(gamma-1) p log p - (1-p)^gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        wm1 = np.where(one_minus > 0, one_minus ** (gam - 1.0), 0.0 if gam > 1 else np.inf)
    coef = gam * wm1 * p[rows, y] * logp_y - w
    coef = np.where(np.isfinite(coef), coef, 0.0)
    return -w * logp_y, -coef[:, None] * ce_g


def loss_and_grad(kind: LossKind, z, y):
    """Loss value and dLoss/dz for one sample (1-D ``z``) or a batch (mean loss)."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    yb = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if zb.ndim != 2 or yb.shape != (zb.shape[0],):
        raise ValueError(f"logits {z.shape} and labels {np.shape(y)} do not match")
    if yb.min() < 0 or yb.max() >= zb.shape[1]:
        raise ValueError("label out of range")
    loss, g = _per_sample(kind, zb, yb)
    if single:
        return float(loss[0]), g[0]
    b = zb.shape[0]
    return float(loss.mean()), g / b


def per_sample_loss(kind: LossKind, z, y) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    return _per_sample(kind, z, np.atleast_1d(np.asarray(y, dtype=np.int64)))[0]
