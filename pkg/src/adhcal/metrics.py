"""Calibration and classification metrics.

Records are kept column-wise: a confidence matrix ``[N x n]`` (rows on the
simplex) plus true labels. Bins are equal width on [0, 1], right-closed, with
the first bin also closed at 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

NLL_FLOOR = 1e-300
POPULATIONS = ("max_component", "all_components")


@dataclass(frozen=True)
class PredictionRecords:
    confidence: np.ndarray   # [N x n]
    truth: np.ndarray        # [N]

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.confidence, dtype=np.float64))
        t = np.atleast_1d(np.asarray(self.truth, dtype=np.int64))
        if c.shape[0] != t.shape[0]:
            raise ValueError("one truth label per confidence row required")
        if c.shape[0] == 0:
            raise ValueError("records must be non-empty")
        if (c < 0).any() or np.abs(c.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("confidence rows must lie on the simplex")
        if t.min() < 0 or t.max() >= c.shape[1]:
            raise ValueError("truth label out of range")
        object.__setattr__(self, "confidence", c)
        object.__setattr__(self, "truth", t)

    def __len__(self):
        return self.truth.shape[0]

    @property
    def predicted(self) -> np.ndarray:
        return np.argmax(self.confidence, axis=1)

    @property
    def top_confidence(self) -> np.ndarray:
        return self.confidence.max(axis=1)


@dataclass(frozen=True)
class BinnedReliability:
    n_bins: int
    counts: np.ndarray
    conf_sums: np.ndarray
    correct_sums: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return bin_edges(self.n_bins)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def mean_confidence(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.conf_sums / np.maximum(self.counts, 1), 0.0)

    @property
    def accuracy(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.correct_sums / np.maximum(self.counts, 1), 0.0)

    def merge(self, other: "BinnedReliability") -> "BinnedReliability":
        if other.n_bins != self.n_bins:
            raise ValueError("cannot merge binnings with different bin counts")
        return BinnedReliability(self.n_bins, self.counts + other.counts,
                                 self.conf_sums + other.conf_sums,
                                 self.correct_sums + other.correct_sums)


def bin_edges(n_bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_bins + 1)


def bin_index(values, n_bins: int) -> np.ndarray:
    """Bin of each value: bin l covers ``(edges[l], edges[l+1]]``; 0 goes to bin 0."""
    inner = bin_edges(n_bins)[1:-1]
    return np.searchsorted(inner, np.asarray(values, dtype=np.float64), side="left")


def bin_values(conf, correct, n_bins: int) -> BinnedReliability:
    conf = np.asarray(conf, dtype=np.float64).ravel()
    correct = np.asarray(correct, dtype=np.float64).ravel()
    idx = bin_index(conf, n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    conf_sums = np.bincount(idx, weights=conf, minlength=n_bins)
    correct_sums = np.bincount(idx, weights=correct, minlength=n_bins)
    return BinnedReliability(n_bins, counts, conf_sums, correct_sums)


def bin_records(records: PredictionRecords, n_bins: int = 15,
                population: str = "max_component") -> BinnedReliability:
    """Bin either each record's top confidence or every component of every record."""
    if n_bins < 1:
        raise ValueError("need at least one bin")
    if population == "max_component":
        conf = records.top_confidence
        correct = records.predicted == records.truth
    elif population == "all_components":
        conf = records.confidence.ravel()
        onehot = np.zeros_like(records.confidence, dtype=bool)
        onehot[np.arange(len(records)), records.truth] = True
        correct = onehot.ravel()
    else:
        raise ValueError(f"population must be one of {POPULATIONS}")
    return bin_values(conf, correct, n_bins)


def ece(binned: BinnedReliability) -> float:
    n = binned.total
    gaps = np.abs(binned.correct_sums - binned.conf_sums)  # = |B| * |acc - conf|
    return float(gaps.sum() / n)


def ece_records(records: PredictionRecords, n_bins: int = 15,
                population: str = "max_component") -> float:
    return ece(bin_records(records, n_bins, population))


def ece2(support, masses, conditional_accuracy) -> float:
    """sqrt(sum_i f_i * (acc_i - p_i)^2) for a discrete confidence PMF."""
    p = np.asarray(support, dtype=np.float64)
    f = np.asarray(masses, dtype=np.float64)
    a = np.asarray(conditional_accuracy, dtype=np.float64)
    if ((a < 0) | (a > 1)).any():
        raise ValueError("conditional accuracies must lie in [0, 1]")
    return float(np.sqrt(np.sum(f * (a - p) ** 2)))


def ece2_binned(binned: BinnedReliability) -> float:
    """ECE2 with per-bin accuracy standing in for the conditional accuracy."""
    nz = binned.counts > 0
    f = binned.counts[nz] / binned.total
    return ece2(binned.mean_confidence[nz], f, binned.accuracy[nz])


def confidence_entropy(records: PredictionRecords) -> float:
    """Mean Shannon entropy (nats) of the confidence vectors, with 0 log 0 = 0."""
    c = records.confidence
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log(c), 0.0)
    return float(-terms.sum(axis=1).mean())


def nll(records: PredictionRecords, return_flag: bool = False):
    """Mean -log p_truth. Zero probabilities are clamped to 1e-300; the flag says so."""
    p = records.confidence[np.arange(len(records)), records.truth]
    clamped = bool((p < NLL_FLOOR).any())
    value = float(-np.log(np.maximum(p, NLL_FLOOR)).mean())
    return (value, clamped) if return_flag else value


def accuracy(records: PredictionRecords) -> float:
    return float(np.mean(records.predicted == records.truth))


def auroc(in_dist_scores, shifted_scores) -> float:
    """P(in-distribution score > shifted score), ties counted one half."""
    a = np.asarray(in_dist_scores, dtype=np.float64).ravel()
    b = np.asarray(shifted_scores, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both score lists must be non-empty")
    ranks = rankdata(np.concatenate([a, b]))  # midranks
    u = ranks[:a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


def summarize(records: PredictionRecords, n_bins: int = 15) -> dict:
    return {
        "accuracy": accuracy(records),
        "nll": nll(records),
        "ece_max": ece_records(records, n_bins, "max_component"),
        "ece_all": ece_records(records, n_bins, "all_components"),
        "ece2_max": ece2_binned(bin_records(records, n_bins, "max_component")),
        "entropy": confidence_entropy(records),
    }


# ---------------------------------------------------------------------------
# exports

RELIABILITY_COLUMNS = ("bin_low", "bin_high", "count", "conf", "acc", "gap")


def reliability_export(binned: BinnedReliability) -> list[dict]:
    """One row per bin, empty bins included with zero statistics."""
    e = binned.edges
    conf, acc = binned.mean_confidence, binned.accuracy
    rows = []
    for l in range(binned.n_bins):
        rows.append({
            "bin_low": float(e[l]),
            "bin_high": float(e[l + 1]),
            "count": int(binned.counts[l]),
            "conf": float(conf[l]),
            "acc": float(acc[l]),
            "gap": float(acc[l] - conf[l]),
        })
    return rows


def confidence_histogram(records: PredictionRecords, n_bins: int = 15) -> list[dict]:
    """Share of records per top-confidence bin."""
    b = bin_records(records, n_bins, "max_component")
    e = b.edges
    return [
        {"bin_low": float(e[l]), "bin_high": float(e[l + 1]),
         "count": int(b.counts[l]), "fraction": float(b.counts[l] / b.total)}
        for l in range(n_bins)
    ]


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def read_csv_rows(path) -> list[dict]:
    return parse_csv_rows(Path(path).read_text())


def parse_csv_rows(text: str) -> list[dict]:
    """Parse a CSV written by ``rows_to_csv``; numeric cells become int/float."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in r.items():
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        rows.append(parsed)
    return rows


def records_to_jsonl(records: PredictionRecords) -> str:
    lines = []
    for c, p, t in zip(records.confidence, records.predicted, records.truth):
        lines.append(json.dumps({"confidence": c.tolist(), "predicted": int(p), "truth": int(t)}))
    return "\n".join(lines) + "\n"


def read_records_jsonl(path) -> PredictionRecords:
    return records_from_jsonl(Path(path).read_text())


def records_from_jsonl(text: str) -> PredictionRecords:
    conf, truth = [], []
    for line in text.splitlines():
        if line.strip():
            d = json.loads(line)
            conf.append(d["confidence"])
            truth.append(d["truth"])
    return PredictionRecords(np.array(conf), np.array(truth))
