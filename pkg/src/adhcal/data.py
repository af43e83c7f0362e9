"""Synthetic datasets, splitting, CSV ingestion and noise corruption."""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid dataset or experiment configuration."""


class ParseError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"features must be a non-empty matrix, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError("one label per row is required")
        if not np.isfinite(x).all():
            raise ValueError("features must be finite")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.n_classes)


def gen_gaussian_mixture(n_classes, samples_per_class, dim, spread, seed,
                         center_scale=1.0) -> LabeledDataset:
    """Balanced isotropic Gaussian mixture.

    Centers are drawn from ``N(0, center_scale^2 I)``, then each class gets
    ``samples_per_class`` points ``center + spread * N(0, I)``. Rows are
    ordered by class.
    """
    if min(n_classes, samples_per_class, dim) < 1:
        raise ConfigError("n_classes, samples_per_class and dim must be positive")
    if not spread > 0:
        raise ConfigError("spread must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(n_classes, dim))
    noise = rng.standard_normal((n_classes, samples_per_class, dim))
    x = (centers[:, None, :] + spread * noise).reshape(-1, dim)
    y = np.repeat(np.arange(n_classes), samples_per_class)
    return LabeledDataset(x, y, n_classes)


def mixture_centers(n_classes, dim, seed, center_scale=1.0) -> np.ndarray:
    """The centers ``gen_gaussian_mixture`` draws for the same arguments."""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, center_scale, size=(n_classes, dim))


@dataclass(frozen=True)
class SplitSpec:
    train: float
    calibration: float
    test: float
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.calibration, self.test)
        if min(fr) <= 0:
            raise ConfigError("split fractions must be positive")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {sum(fr)}, not 1")


def split_sizes(m: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = int(round(spec.train * m))
    n_cal = int(round(spec.calibration * m))
    n_test = m - n_train - n_cal
    if min(n_train, n_cal, n_test) < 1:
        raise ConfigError(
            f"split {spec.train}/{spec.calibration}/{spec.test} of {m} rows leaves an empty part"
        )
    return n_train, n_cal, n_test


def split_indices(m: int, spec: SplitSpec):
    """Seeded partition of ``range(m)``; each part keeps ascending row order."""
    n_train, n_cal, _ = split_sizes(m, spec)
    perm = np.random.default_rng(spec.seed).permutation(m)
    return (
        np.sort(perm[:n_train]),
        np.sort(perm[n_train:n_train + n_cal]),
        np.sort(perm[n_train + n_cal:]),
    )


def split(data: LabeledDataset, spec: SplitSpec):
    """Return ``(train, calibration, test)`` subsets."""
    return tuple(data.subset(i) for i in split_indices(len(data), spec))


def noise_sigma(severity: int, scale: float = 0.1) -> float:
    """Noise level in units of per-feature std: ``scale * severity``."""
    if not isinstance(severity, (int, np.integer)) or not 1 <= severity <= 5:
        raise ConfigError(f"severity must be an integer in 1..5, got {severity!r}")
    return scale * severity


def corrupt_gaussian(data: LabeledDataset, severity: int, seed, scale: float = 0.1,
                     feature_std=None) -> LabeledDataset:
    """Add ``noise_sigma(severity) * std_j * N(0, 1)`` to every feature ``j``.

    ``feature_std`` defaults to the per-feature std of ``data`` itself; pass the
    training set's std to corrupt batches with a fixed reference scale.
    """
    sigma = noise_sigma(severity, scale)
    x = data.features
    std = x.std(axis=0) if feature_std is None else np.asarray(feature_std, dtype=np.float64)
    eps = np.random.default_rng(seed).standard_normal(x.shape)
    return LabeledDataset(x + sigma * std * eps, data.labels, data.n_classes)


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_csv(path, n_classes: int) -> LabeledDataset:
    """Read rows of ``feature,...,feature,label``; ``.gz`` files are decompressed."""
    feats, labels = [], []
    width = None
    with _open_text(path) as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise ParseError(f"row {lineno}: need at least one feature and a label")
            elif len(row) != width:
                raise ParseError(f"row {lineno}: expected {width} cells, found {len(row)}")
            try:
                vals = [float(c) for c in row[:-1]]
                raw = float(row[-1])
            except ValueError as exc:
                raise ParseError(f"row {lineno}: non-numeric cell ({exc})") from None
            if raw != int(raw):
                raise ParseError(f"row {lineno}: label {row[-1]!r} is not an integer")
            label = int(raw)
            if not 0 <= label < n_classes:
                raise ParseError(f"row {lineno}: label {label} outside 0..{n_classes - 1}")
            if not all(np.isfinite(vals)):
                raise ParseError(f"row {lineno}: non-finite feature")
            feats.append(vals)
            labels.append(label)
    if not feats:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(np.array(feats), np.array(labels), n_classes)


def save_csv(data: LabeledDataset, path) -> None:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        for x, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
