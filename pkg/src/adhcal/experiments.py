"""Experiment configs and runners.

A config is a JSON object with the sections below; anything omitted takes the
default shown in ``DEFAULTS`` (the ``train`` section defaults to
``TrainConfig()``). Unknown keys anywhere are errors. Every random draw is
derived from the single top-level ``seed``.

Each runner writes into ``out_dir`` and returns a dict of headline values.
Files are written to a temporary name and renamed into place, so an
interrupted run never leaves a half-written artifact behind.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as D
from . import nn
from . import oracles
from .doublehead import build_double_head, main_logits, save_model
from .losses import LOSS_NAMES, LossKind, softmax
from .metrics import (PredictionRecords, auroc, bin_records, confidence_histogram,
                      reliability_export, rows_to_csv, summarize)
from .postproc import apply_temperature, fit_temperature
from .trainer import TrainConfig, TrainingDiverged, overhead_fraction, train  # noqa: F401

SCHEMA_VERSION = 1
KINK_MARGIN = 1e-3  # keep finite differences away from ReLU kinks
EXPERIMENTS = ("train", "beta_sweep", "k_sweep", "shift_auroc", "theorem1", "theorem2",
               "gradcheck")

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "experiment": "train",
    "seed": 0,
    "out_dir": "runs",
    "dataset": {"kind": "gaussian_mixture", "n_classes": 10, "samples_per_class": 450,
                "dim": 4, "spread": 0.27, "center_scale": 1.0},
    "split": {"train": 4 / 9, "calibration": 1 / 9, "test": 4 / 9},
    "model": {"main_hidden": [256, 256]},
    "sweep": {"beta0": [0.1, 0.6, 1.0, 1.2, 1.5, 2.0], "calib_period": [5, 10, 35, 70],
              "severity": [1, 2, 3, 4, 5]},
    "oracle": {"trials": 10_000, "n_min": 2, "n_max": 10, "beta_min": 0.5, "beta_max": 2.0,
               "support_step": 0.05, "mass_step": 0.05, "acc_step": 0.1, "shannon": True,
               "gradcheck_cases": 100},
}
CSV_DATASET_KEYS = ("kind", "path", "n_classes")

# Training settings of the shipped reference task. The main head runs without
# weight decay so it overfits and turns overconfident; the calibration head
# uses its own learning rate because lr ratio 100 diverges at this scale.
# Batch size 25 gives 80 steps per epoch, so k = 70 still takes a calibration step.
REFERENCE_TRAIN = {"lr_main": 0.05, "lr_calib": 0.01, "batch_size": 25,
                   "calib_batch_size": 128, "weight_decay_main": 0.0}

_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig) if f.name != "seed"}


def reference_config(**top) -> dict:
    """Config dict of the reference task; keyword arguments set top-level keys."""
    cfg = {"train": dict(REFERENCE_TRAIN)}
    cfg.update(top)
    return cfg


@dataclass
class ExperimentSpec:
    experiment: str
    seed: int
    out_dir: str
    dataset: dict
    split: dict
    model: dict
    train: TrainConfig
    sweep: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        tr = dataclasses.asdict(self.train)
        tr.pop("seed")
        tr["milestones"] = list(tr["milestones"])
        return {"schema": SCHEMA_VERSION, "experiment": self.experiment, "seed": self.seed,
                "out_dir": self.out_dir, "dataset": dict(self.dataset),
                "split": dict(self.split), "model": copy.deepcopy(self.model), "train": tr,
                "sweep": copy.deepcopy(self.sweep), "oracle": dict(self.oracle)}


# ---------------------------------------------------------------------------
# validation


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _merge_section(name, given, defaults, errors):
    if not isinstance(given, dict):
        errors.append(f"{name}: expected an object")
        return dict(defaults)
    out = dict(defaults)
    for k, v in given.items():
        if k not in defaults:
            errors.append(f"{name}.{k}: unknown key")
        else:
            out[k] = v
    return out


def _check_train(given, errors) -> TrainConfig | None:
    if not isinstance(given, dict):
        errors.append("train: expected an object")
        return None
    kw = {}
    for k, v in given.items():
        if k not in _TRAIN_FIELDS:
            errors.append(f"train.{k}: unknown key")
            continue
        kw[k] = v
    for k in ("epochs", "batch_size", "eval_every", "n_bins"):
        if k in kw and not (_is_int(kw[k]) and kw[k] >= (0 if k == "epochs" else 1)):
            errors.append(f"train.{k}: expected a {'nonnegative' if k == 'epochs' else 'positive'} integer")
    for k in ("calib_period", "calib_batch_size", "augment_severity"):
        if k in kw and kw[k] is not None and not (_is_int(kw[k]) and kw[k] >= 1):
            errors.append(f"train.{k}: expected a positive integer or null")
    for k in ("lr_main", "lr_ratio", "beta0", "noise_scale", "lr_factor"):
        if k in kw and not (_is_num(kw[k]) and kw[k] > 0):
            errors.append(f"train.{k}: expected a positive number")
    if "lr_calib" in kw and kw["lr_calib"] is not None and not (_is_num(kw["lr_calib"])
                                                                and kw["lr_calib"] > 0):
        errors.append("train.lr_calib: expected a positive number or null")
    for k in ("weight_decay_main", "weight_decay_calib", "focal_gamma"):
        if k in kw and not (_is_num(kw[k]) and kw[k] >= 0):
            errors.append(f"train.{k}: expected a nonnegative number")
    if "momentum" in kw and not (_is_num(kw["momentum"]) and 0 <= kw["momentum"] < 1):
        errors.append("train.momentum: expected a number in [0, 1)")
    for k in ("loss_main", "loss_calib"):
        if k in kw and kw[k] not in LOSS_NAMES:
            errors.append(f"train.{k}: expected one of {', '.join(LOSS_NAMES)}")
    if "schedule" in kw and kw["schedule"] not in ("cosine", "multistep", "constant"):
        errors.append("train.schedule: expected cosine, multistep or constant")
    if "milestones" in kw:
        ms = kw["milestones"]
        if not (isinstance(ms, (list, tuple)) and all(_is_int(m) and m > 0 for m in ms)):
            errors.append("train.milestones: expected a list of positive integers")
        else:
            kw["milestones"] = tuple(ms)
    if errors:
        return None
    try:
        return TrainConfig(**kw)
    except (D.ConfigError, ValueError) as exc:
        errors.append(f"train: {exc}")
        return None


def _check_dataset(ds, errors):
    kind = ds.get("kind", "gaussian_mixture") if isinstance(ds, dict) else None
    if kind == "csv":
        out = {}
        for k, v in ds.items():
            if k not in CSV_DATASET_KEYS:
                errors.append(f"dataset.{k}: unknown key")
            out[k] = v
        if not isinstance(out.get("path"), str):
            errors.append("dataset.path: expected a file path")
        if not (_is_int(out.get("n_classes")) and out["n_classes"] >= 2):
            errors.append("dataset.n_classes: expected an integer >= 2")
        return out
    if kind != "gaussian_mixture":
        errors.append("dataset.kind: expected gaussian_mixture or csv")
        return dict(DEFAULTS["dataset"])
    out = _merge_section("dataset", ds, DEFAULTS["dataset"], errors)
    for k in ("samples_per_class", "dim"):
        if not (_is_int(out[k]) and out[k] >= 1):
            errors.append(f"dataset.{k}: expected a positive integer")
    if not (_is_int(out["n_classes"]) and out["n_classes"] >= 2):
        errors.append("dataset.n_classes: expected an integer >= 2")
    for k in ("spread", "center_scale"):
        if not (_is_num(out[k]) and out[k] > 0):
            errors.append(f"dataset.{k}: expected a positive number")
    return out


def validate_config(source) -> ExperimentSpec:
    """Normalize a config (dict, JSON text path) into an ExperimentSpec.

    Raises ``ConfigError`` whose ``errors`` attribute lists every problem found.
    """
    if isinstance(source, (str, Path)):
        try:
            source = json.loads(Path(source).read_text())
        except OSError as exc:
            err = D.ConfigError(f"cannot read config: {exc}")
            err.errors = [str(err)]
            raise err from None
        except json.JSONDecodeError as exc:
            err = D.ConfigError(f"config is not valid JSON: {exc}")
            err.errors = [str(err)]
            raise err from None
    if not isinstance(source, dict):
        err = D.ConfigError("config must be a JSON object")
        err.errors = [str(err)]
        raise err
    errors: list[str] = []
    allowed = set(DEFAULTS) | {"train"}
    for k in source:
        if k not in allowed:
            errors.append(f"{k}: unknown key")
    if source.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        errors.append(f"schema: only version {SCHEMA_VERSION} is supported")
    experiment = source.get("experiment", DEFAULTS["experiment"])
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: expected one of {', '.join(EXPERIMENTS)}")
    seed = source.get("seed", DEFAULTS["seed"])
    if not (_is_int(seed) and seed >= 0):
        errors.append("seed: expected a nonnegative integer")
    out_dir = source.get("out_dir", DEFAULTS["out_dir"])
    if not isinstance(out_dir, str) or not out_dir:
        errors.append("out_dir: expected a directory path")

    dataset = _check_dataset(source.get("dataset", {}), errors)
    split = _merge_section("split", source.get("split", {}), DEFAULTS["split"], errors)
    if not all(_is_num(v) for v in split.values()):
        errors.append("split: fractions must be numbers")
    else:
        try:
            D.SplitSpec(split["train"], split["calibration"], split["test"])
        except D.ConfigError as exc:
            errors.append(f"split: {exc}")
    model = _merge_section("model", source.get("model", {}), DEFAULTS["model"], errors)
    hidden = model["main_hidden"]
    if not (isinstance(hidden, (list, tuple)) and all(_is_int(h) and h >= 1 for h in hidden)):
        errors.append("model.main_hidden: expected a list of positive integers")
    else:
        model["main_hidden"] = list(hidden)
    sweep = _merge_section("sweep", source.get("sweep", {}), DEFAULTS["sweep"], errors)
    if not (isinstance(sweep["beta0"], list) and sweep["beta0"]
            and all(_is_num(b) and b > 0 for b in sweep["beta0"])):
        errors.append("sweep.beta0: expected a non-empty list of positive numbers")
    if not (isinstance(sweep["calib_period"], list) and sweep["calib_period"]
            and all(_is_int(k) and k >= 1 for k in sweep["calib_period"])):
        errors.append("sweep.calib_period: expected a non-empty list of positive integers")
    if not (isinstance(sweep["severity"], list) and sweep["severity"]
            and all(_is_int(s) and 1 <= s <= 5 for s in sweep["severity"])):
        errors.append("sweep.severity: expected a non-empty list of integers in 1..5")
    oracle = _merge_section("oracle", source.get("oracle", {}), DEFAULTS["oracle"], errors)
    for k in ("trials", "n_min", "n_max", "gradcheck_cases"):
        if not (_is_int(oracle[k]) and oracle[k] >= 1):
            errors.append(f"oracle.{k}: expected a positive integer")
    if _is_int(oracle["n_min"]) and oracle["n_min"] < 2:
        errors.append("oracle.n_min: expected an integer >= 2")
    for k in ("beta_min", "beta_max", "support_step", "mass_step", "acc_step"):
        if not (_is_num(oracle[k]) and oracle[k] > 0):
            errors.append(f"oracle.{k}: expected a positive number")
    if not isinstance(oracle["shannon"], bool):
        errors.append("oracle.shannon: expected true or false")

    train_cfg = _check_train(source.get("train", {}), errors) if not errors else None
    if errors:
        err = D.ConfigError("; ".join(errors))
        err.errors = errors
        raise err
    return ExperimentSpec(experiment, seed, out_dir, dataset, split, model, train_cfg,
                          sweep, oracle)


# ---------------------------------------------------------------------------
# artifact writing


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# shared pieces


@dataclass
class Streams:
    """Integer seeds for every randomized component, all derived from one seed."""
    data: int
    split: int
    init_main: int
    init_calib: int
    train: int
    corrupt: int
    ood: int
    oracle: int

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        kids = np.random.SeedSequence(seed).spawn(8)
        return cls(*(int(k.generate_state(1)[0]) for k in kids))


def load_data(spec: ExperimentSpec, streams: Streams):
    ds = spec.dataset
    if ds["kind"] == "csv":
        full = D.load_csv(ds["path"], ds["n_classes"])
    else:
        full = D.gen_gaussian_mixture(ds["n_classes"], ds["samples_per_class"], ds["dim"],
                                      ds["spread"], streams.data, ds["center_scale"])
    sp = spec.split
    return D.split(full, D.SplitSpec(sp["train"], sp["calibration"], sp["test"], streams.split))


def train_once(spec: ExperimentSpec, streams: Streams, splits, cfg: TrainConfig | None = None):
    tr, ca, te = splits
    cfg = dataclasses.replace(cfg or spec.train, seed=streams.train)
    model = build_double_head(tr.dim, tr.n_classes, spec.model["main_hidden"],
                              np.random.default_rng(streams.init_main),
                              np.random.default_rng(streams.init_calib))
    model, logs = train(model, tr, ca, cfg, te)
    return model, logs


def head_logits(model, x):
    z = main_logits(model, x)
    return {"main": z, "calib": nn.predict_logits(model.calib, z)}


def head_metrics(model, calib_set, test_set, n_bins):
    """Per-head test metrics with and without temperature scaling fitted on ``calib_set``."""
    fit_logits = head_logits(model, calib_set.features)
    test_logits = head_logits(model, test_set.features)
    out, temps = {}, {}
    for head in ("main", "calib"):
        t = fit_temperature(fit_logits[head], calib_set.labels)
        raw = PredictionRecords(softmax(test_logits[head]), test_set.labels)
        ts = PredictionRecords(apply_temperature(t, test_logits[head]), test_set.labels)
        out[head] = {**summarize(raw, n_bins),
                     "temperature": t.T, "temperature_degenerate": t.degenerate,
                     "ts": summarize(ts, n_bins)}
        temps[head] = t
    return out, temps, test_logits


def _epoch_jsonl(logs) -> str:
    return "".join(json.dumps(l.to_dict(), sort_keys=True) + "\n" for l in logs)


def _write_head_tables(out: Path, model, test_set, n_bins, prefix=""):
    logits = head_logits(model, test_set.features)
    for head, z in logits.items():
        rec = PredictionRecords(softmax(z), test_set.labels)
        for pop in ("max_component", "all_components"):
            tag = "" if pop == "max_component" else "_all"
            atomic_write(out / f"{prefix}reliability_{head}{tag}.csv",
                         rows_to_csv(reliability_export(bin_records(rec, n_bins, pop))))
        atomic_write(out / f"{prefix}histogram_{head}.csv",
                     rows_to_csv(confidence_histogram(rec, n_bins)))


def _timing(logs) -> dict:
    return {"main_ns": sum(l.main_ns for l in logs), "calib_ns": sum(l.calib_ns for l in logs),
            "overhead_fraction": overhead_fraction(logs)}


# ---------------------------------------------------------------------------
# runners


def run_train(spec: ExperimentSpec, out: Path) -> dict:
    streams = Streams.from_seed(spec.seed)
    splits = load_data(spec, streams)
    model, logs = train_once(spec, streams, splits)
    metrics, _, _ = head_metrics(model, splits[1], splits[2], spec.train.n_bins)
    metrics["epochs"] = len(logs)
    atomic_write(out / "epochs.jsonl", _epoch_jsonl(logs))
    atomic_write(out / "metrics.json", dump_json(metrics))
    atomic_write(out / "timing.json", dump_json(_timing(logs)))
    _write_head_tables(out, model, splits[2], spec.train.n_bins)
    tmp = out / "model.json.tmp"
    save_model(model, tmp, config=spec.to_dict())
    os.replace(tmp, out / "model.json")
    return {"metrics": metrics, "logs": logs, "model": model, "splits": splits,
            "streams": streams}


def run_beta_sweep(spec: ExperimentSpec, out: Path) -> dict:
    streams = Streams.from_seed(spec.seed)
    splits = load_data(spec, streams)
    rows, points = [], {}
    for beta0 in spec.sweep["beta0"]:
        cfg = dataclasses.replace(spec.train, beta0=float(beta0))
        model, logs = train_once(spec, streams, splits, cfg)
        m, _, _ = head_metrics(model, splits[1], splits[2], cfg.n_bins)
        c = m["calib"]
        rows.append({"beta0": float(beta0), "ece_max": c["ece_max"], "ece_all": c["ece_all"],
                     "entropy": c["entropy"], "accuracy": c["accuracy"], "nll": c["nll"]})
        points[repr(float(beta0))] = m
        atomic_write(out / f"epochs_beta{beta0}.jsonl", _epoch_jsonl(logs))
    atomic_write(out / "beta_sweep.csv", rows_to_csv(rows))
    atomic_write(out / "metrics.json", dump_json({"points": points, "rows": rows}))
    return {"rows": rows}


def run_k_sweep(spec: ExperimentSpec, out: Path) -> dict:
    streams = Streams.from_seed(spec.seed)
    splits = load_data(spec, streams)
    rows, metric_rows = [], []
    for k in spec.sweep["calib_period"]:
        cfg = dataclasses.replace(spec.train, calib_period=int(k))
        model, logs = train_once(spec, streams, splits, cfg)
        m, _, _ = head_metrics(model, splits[1], splits[2], cfg.n_bins)
        steps = sum(l.n_calib_steps for l in logs)
        metric_rows.append({"calib_period": int(k), "calib_steps": steps,
                            "ece_max": m["calib"]["ece_max"], "ece_max_main": m["main"]["ece_max"],
                            "accuracy": m["calib"]["accuracy"]})
        rows.append({**metric_rows[-1], "overhead": overhead_fraction(logs),
                     "bound": 1.5 / k + 0.01})
    atomic_write(out / "k_sweep.csv", rows_to_csv(rows))
    # wall-clock overhead lives only in the CSV; the JSON stays reproducible
    atomic_write(out / "metrics.json", dump_json({"rows": metric_rows}))
    return {"rows": rows}


def _top_conf(logits, t=None):
    p = softmax(logits) if t is None else apply_temperature(t, logits)
    return p.max(axis=1)


def shift_table(spec: ExperimentSpec, streams: Streams, model, splits) -> tuple[list, dict]:
    """AUROC of top confidence, clean test set against each shifted set, per head.

    Shifted sets are the test set under Gaussian noise at every configured
    severity plus, for mixture datasets, a mixture with fresh centers.
    """
    tr, ca, te = splits
    metrics, temps, clean = head_metrics(model, ca, te, spec.train.n_bins)
    shifted = []
    std = tr.features.std(axis=0)
    for sev in spec.sweep["severity"]:
        c = D.corrupt_gaussian(te, int(sev), streams.corrupt + int(sev), spec.train.noise_scale,
                               feature_std=std)
        shifted.append(("gaussian_noise", int(sev), c, True))
    ds = spec.dataset
    if ds["kind"] == "gaussian_mixture":
        ood = D.gen_gaussian_mixture(ds["n_classes"], max(1, len(te) // ds["n_classes"]),
                                     ds["dim"], ds["spread"], streams.ood, ds["center_scale"])
        shifted.append(("ood_mixture", 0, ood, False))
    rows = []
    for name, sev, data, labelled in shifted:
        z = head_logits(model, data.features)
        for head in ("main", "calib"):
            acc = float(np.mean(np.argmax(z[head], axis=1) == data.labels)) if labelled else ""
            rows.append({
                "shift": name, "severity": sev, "head": head,
                "auroc": auroc(_top_conf(clean[head]), _top_conf(z[head])),
                "auroc_ts": auroc(_top_conf(clean[head], temps[head]),
                                  _top_conf(z[head], temps[head])),
                "accuracy": acc,
            })
    return rows, metrics


def run_shift_auroc(spec: ExperimentSpec, out: Path) -> dict:
    streams = Streams.from_seed(spec.seed)
    splits = load_data(spec, streams)
    model, _ = train_once(spec, streams, splits)
    rows, metrics = shift_table(spec, streams, model, splits)
    atomic_write(out / "shift_auroc.csv", rows_to_csv(rows))
    atomic_write(out / "metrics.json", dump_json({"heads": metrics, "rows": rows}))
    return {"rows": rows, "metrics": metrics}


def run_theorem1(spec: ExperimentSpec, out: Path) -> dict:
    o = spec.oracle
    rep = oracles.check_theorem1(o["trials"], (o["n_min"], o["n_max"]),
                                 (o["beta_min"], o["beta_max"]), Streams.from_seed(spec.seed).oracle)
    d = rep.to_dict()
    atomic_write(out / "theorem1.json", dump_json(d))
    atomic_write(out / "metrics.json", dump_json({k: d[k] for k in d if k != "counterexamples"}))
    return d


def run_theorem2(spec: ExperimentSpec, out: Path) -> dict:
    o = spec.oracle
    cols = oracles.theorem2_grid(o["support_step"], o["mass_step"], o["acc_step"], o["shannon"])
    err = np.abs(cols["lhs_sq"] - cols["lhs_sq_expanded"])
    summary = {"cells": int(cols["p1"].size), "holds": int(cols["holds"].sum()),
               "violations": int((~cols["holds"]).sum()),
               "negative_radicand": int((cols["radicand"] < 0).sum()),
               "expansion_max_abs_err": float(err.max()), "shannon": o["shannon"]}
    atomic_write(out / "theorem2_grid.csv", oracles.grid_to_csv(cols))
    atomic_write(out / "metrics.json", dump_json(summary))
    return summary


def run_gradcheck(spec: ExperimentSpec, out: Path) -> dict:
    """Finite-difference checks of every loss and of small nets under every loss."""
    rng = np.random.default_rng(Streams.from_seed(spec.seed).oracle)
    cases = spec.oracle["gradcheck_cases"]
    kinds = [LossKind("ce"), LossKind("brier"), LossKind("focal", gamma=spec.train.focal_gamma),
             LossKind("adh", beta=spec.train.beta0)]
    report = {}
    from .losses import loss_and_grad
    for kind in kinds:
        worst = 0.0
        for _ in range(cases):
            z = rng.normal(0, 2, size=5)
            y = int(rng.integers(5))
            f = lambda v, kind=kind, y=y: loss_and_grad(kind, v, y)  # noqa: E731
            worst = max(worst, oracles.grad_check(f, z, 1e-6).worst_error)
        report[f"loss_{kind.name}"] = {"worst_error": worst, "tolerance": 1e-6,
                                       "passed": worst < 1e-6, "cases": cases}
        worst = 0.0
        for _ in range(cases):
            net = nn.init_dense([3, 4, 3, 3] if rng.random() < 0.5 else [3, 5, 3], rng)
            for layer in net.layers:
                layer.bias[:] = rng.normal(scale=0.3, size=layer.out_dim)
            x = rng.normal(size=(4, 3))
            while oracles.kink_margin(net, x) < KINK_MARGIN:
                x = rng.normal(size=(4, 3))
            y = rng.integers(0, 3, 4)
            res = oracles.grad_check(oracles.net_objective(net, x, y, kind), net.get_flat())
            worst = max(worst, res.worst_error)
        report[f"net_{kind.name}"] = {"worst_error": worst, "tolerance": 1e-4,
                                      "passed": worst < 1e-4, "cases": cases}
    atomic_write(out / "metrics.json", dump_json(report))
    return report


RUNNERS = {"train": run_train, "beta_sweep": run_beta_sweep, "k_sweep": run_k_sweep,
           "shift_auroc": run_shift_auroc, "theorem1": run_theorem1,
           "theorem2": run_theorem2, "gradcheck": run_gradcheck}


def run(spec: ExperimentSpec) -> dict:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise D.ConfigError(f"output directory {out} is not writable")
    atomic_write(out / "config.json", dump_json(spec.to_dict()))
    return RUNNERS[spec.experiment](spec, out)
