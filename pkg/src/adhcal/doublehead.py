"""Main head plus a shallow calibration head reading the main head's logits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .losses import LossKind, loss_and_grad


@dataclass
class DoubleHeadModel:
    main: nn.DenseNet
    calib: nn.DenseNet

    def __post_init__(self):
        n = self.main.output_dim
        if self.calib.input_dim != n or self.calib.output_dim != n:
            raise nn.ShapeError(
                f"calibration head must map {n} logits to {n} classes, "
                f"got {self.calib.input_dim} -> {self.calib.output_dim}"
            )

    @property
    def n_classes(self) -> int:
        return self.main.output_dim

    def copy(self) -> "DoubleHeadModel":
        return DoubleHeadModel(self.main.copy(), self.calib.copy())


def calib_hidden_dim(n_classes: int) -> int:
    return math.ceil(n_classes / 2)


def build_double_head(input_dim, n_classes, main_hidden, rng_main, rng_calib) -> DoubleHeadModel:
    """Main head ``input_dim -> *main_hidden -> n``; calibration head ``n -> ceil(n/2) -> n``."""
    main = nn.init_dense([input_dim, *main_hidden, n_classes], rng_main)
    calib = nn.init_dense([n_classes, calib_hidden_dim(n_classes), n_classes], rng_calib)
    return DoubleHeadModel(main, calib)


def main_logits(model: DoubleHeadModel, batch) -> np.ndarray:
    return nn.predict_logits(model.main, batch)


def calib_logits(model: DoubleHeadModel, batch, beta: float = 1.0) -> np.ndarray:
    """Calibration-head output on ``beta * main_logits(batch)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    z = main_logits(model, batch)
    return nn.predict_logits(model.calib, beta * z if beta != 1.0 else z)


def calib_loss_and_grads(model: DoubleHeadModel, batch, labels, loss: LossKind,
                         input_beta: float = 1.0, stop_main_grad: bool = True):
    """Calibration-head loss and parameter gradients for one batch.

    ``loss`` is applied to the head's output logits (an ``adh`` loss rescales
    them by its beta); ``input_beta`` rescales the main logits entering the head.
    Returns ``(loss, calib_grads, main_grads)``. With ``stop_main_grad`` the main
    head is only run forward and ``main_grads`` is ``None``.
    """
    if not input_beta > 0:
        raise ValueError("beta must be positive")
    z_main, main_cache = nn.forward(model.main, batch)
    h_in = input_beta * z_main if input_beta != 1.0 else z_main
    out, cache = nn.forward(model.calib, h_in)
    value, g_out = loss_and_grad(loss, out, labels)
    if stop_main_grad:
        return value, nn.backward(model.calib, cache, g_out), None
    calib_grads, g_in = nn.backward(model.calib, cache, g_out, return_input_grad=True)
    main_grads = nn.backward(model.main, main_cache, input_beta * g_in)
    return value, calib_grads, main_grads


def predict_label(logits) -> np.ndarray:
    """argmax per row; np.argmax breaks ties at the lowest index."""
    return np.argmax(np.asarray(logits), axis=-1)


def model_to_dict(model: DoubleHeadModel, config=None) -> dict:
    return {
        "format": "adhcal-doublehead",
        "version": nn.CHECKPOINT_VERSION,
        "main": nn.net_to_dict(model.main),
        "calib": nn.net_to_dict(model.calib),
        "config": config,
    }


def model_from_dict(d: dict) -> DoubleHeadModel:
    if d.get("format") != "adhcal-doublehead":
        raise ValueError("not a double-head checkpoint")
    return DoubleHeadModel(nn.net_from_dict(d["main"]), nn.net_from_dict(d["calib"]))


def save_model(model: DoubleHeadModel, path, config=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, config)))


def load_model(path) -> DoubleHeadModel:
    return model_from_dict(json.loads(Path(path).read_text()))
