"""Dense feed-forward networks with explicit backpropagation.

Layers compute ``act(x @ W.T + b)`` with ``W`` stored as ``[out x in]``.
Everything is float64. The optimizer is SGD with Nesterov momentum and
coupled weight decay (``g + wd * theta``), the same update rule torch uses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "adhcal-densenet"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("relu", "identity")


class ShapeError(ValueError):
    """Raised when array dimensions do not chain."""


class StaleCacheError(RuntimeError):
    """Raised when backward is given a cache from another net or an older step."""


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"weight {self.weight.shape} and bias {self.bias.shape} do not match"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class DenseNet:
    layers: list[Layer]
    # bumped on every parameter update, so caches from earlier forwards are rejected
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a DenseNet needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer {i} outputs {a.out_dim} but layer {i + 1} expects {b.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order ``W0, b0, W1, b1, ...``."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params():
            raise ShapeError(f"expected {self.n_params()} values, got {flat.size}")
        pos = 0
        for p in self.params():
            p[...] = flat[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        self.version += 1

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


@dataclass
class ForwardCache:
    net_id: int
    version: int
    inputs: list[np.ndarray]        # input to each layer
    preacts: list[np.ndarray]       # x @ W.T + b for each layer


def init_dense(sizes, rng: np.random.Generator, hidden_activation="relu") -> DenseNet:
    """Build a net with layer widths ``sizes`` (input first, output last).

    Weights are uniform on ``[-a, a]`` with ``a = sqrt(6 / fan_in)``; biases start
    at zero. The last layer has identity activation.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"bad layer sizes {sizes}")
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
        bound = math.sqrt(6.0 / n_in)
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        act = "identity" if i == len(sizes) - 2 else hidden_activation
        layers.append(Layer(w, np.zeros(n_out), act))
    return DenseNet(layers)


def forward(net: DenseNet, batch) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"batch of shape {x.shape} does not fit input_dim {net.input_dim}")
    inputs, preacts = [], []
    h = x
    for layer in net.layers:
        inputs.append(h)
        a = h @ layer.weight.T + layer.bias
        preacts.append(a)
        h = np.maximum(a, 0.0) if layer.activation == "relu" else a
    return h, ForwardCache(id(net), net.version, inputs, preacts)


def predict_logits(net: DenseNet, batch) -> np.ndarray:
    return forward(net, batch)[0]


def backward(net: DenseNet, cache: ForwardCache, grad_out, return_input_grad=False):
    """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dLogits.

    Returns a list shaped like ``net.params()``; with ``return_input_grad`` also
    returns dLoss/dInput as a second value.
    """
    if cache.net_id != id(net) or cache.version != net.version:
        raise StaleCacheError("cache does not belong to the current state of this net")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != cache.preacts[-1].shape:
        raise ShapeError(f"upstream gradient {g.shape} != logits {cache.preacts[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == "relu":
            g = g * (cache.preacts[i] > 0.0)
        grads[2 * i] = g.T @ cache.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0 or return_input_grad:
            g = g @ layer.weight
    if return_input_grad:
        return grads, g
    return grads


def zero_grads(net: DenseNet) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in net.params()]


# ---------------------------------------------------------------------------
# learning-rate schedules and SGD


@dataclass(frozen=True)
class Schedule:
    """Learning-rate multiplier as a function of the global step index.

    kind is ``"constant"``, ``"cosine"`` (half cosine from 1 to 0 over
    ``total_steps``) or ``"multistep"`` (multiply by ``factor`` at each milestone).
    """

    kind: str = "constant"
    total_steps: int = 0
    milestones: tuple[int, ...] = ()
    factor: float = 0.1

    def multiplier(self, step: int) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "cosine":
            if self.total_steps <= 0:
                raise ValueError("cosine schedule needs total_steps > 0")
            if not 0 <= step <= self.total_steps:
                raise ValueError(f"step {step} outside [0, {self.total_steps}]")
            return 0.5 * (1.0 + math.cos(math.pi * step / self.total_steps))
        if self.kind == "multistep":
            passed = sum(1 for m in self.milestones if step >= m)
            return self.factor ** passed
        raise ValueError(f"unknown schedule {self.kind!r}")


@dataclass
class OptimizerState:
    base_lr: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    schedule: Schedule = field(default_factory=Schedule)
    nesterov: bool = True
    buffers: list[np.ndarray] | None = None

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")

    def lr_at(self, step: int) -> float:
        return self.base_lr * self.schedule.multiplier(step)


def sgd_step(net: DenseNet, grads, state: OptimizerState, step_index: int) -> None:
    """One in-place SGD update of ``net`` (and of the momentum buffers in ``state``)."""
    params = net.params()
    if len(grads) != len(params):
        raise ShapeError(f"{len(grads)} gradients for {len(params)} parameters")
    if state.buffers is None:
        state.buffers = [np.zeros_like(p) for p in params]
    lr = state.lr_at(step_index)
    mu = state.momentum
    for p, g, buf in zip(params, grads, state.buffers):
        if g.shape != p.shape:
            raise ShapeError(f"gradient {g.shape} does not match parameter {p.shape}")
        d = g + state.weight_decay * p if state.weight_decay else g
        buf *= mu
        buf += d
        if state.nesterov:
            p -= lr * (d + mu * buf)
        else:
            p -= lr * buf
    net.version += 1


# ---------------------------------------------------------------------------
# checkpoints


def net_to_dict(net: DenseNet) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layers": [
            {
                "in_dim": l.in_dim,
                "out_dim": l.out_dim,
                "activation": l.activation,
                "weight": l.weight.ravel().tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ],
    }


def net_from_dict(d: dict) -> DenseNet:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    layers = []
    for ld in d["layers"]:
        w = np.asarray(ld["weight"], dtype=np.float64).reshape(ld["out_dim"], ld["in_dim"])
        layers.append(Layer(w, np.asarray(ld["bias"], dtype=np.float64), ld["activation"]))
    return DenseNet(layers)


def save_net(net: DenseNet, path) -> None:
    Path(path).write_text(json.dumps(net_to_dict(net)))


def load_net(path) -> DenseNet:
    return net_from_dict(json.loads(Path(path).read_text()))
