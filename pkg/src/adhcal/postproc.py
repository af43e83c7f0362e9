"""Post-hoc temperature scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .losses import softmax

LOG_T_RANGE = (math.log(0.05), math.log(20.0))
SEARCH_TOL = 1e-4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Temperature:
    T: float = 1.0
    degenerate: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("temperature must be positive")


def scaled_nll(logits, labels, T: float) -> float:
    """Mean NLL of softmax(logits / T)."""
    z = np.asarray(logits, dtype=np.float64) / T
    y = np.asarray(labels, dtype=np.int64)
    return float(np.mean(logsumexp(z, axis=1) - z[np.arange(len(y)), y]))


def golden_section(f, lo: float, hi: float, tol: float = SEARCH_TOL) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # the endpoints are candidates too, so a monotone objective lands on the boundary
    candidates = [(f(lo), lo), (f(x), x), (f(hi), hi)]
    return min(candidates)[1]


def fit_temperature(logits, labels) -> Temperature:
    """Temperature minimizing NLL, searched over log T in [log 0.05, log 20].

    The result is flagged degenerate for a single record or when the optimum
    sits on the search boundary.
    """
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if z.shape[0] == 0 or z.shape[0] != y.shape[0]:
        raise ValueError("need a non-empty set of (logits, label) records")
    lo, hi = LOG_T_RANGE
    obj = lambda s: scaled_nll(z, y, math.exp(s))  # noqa: E731
    log_t = golden_section(obj, lo, hi)
    if obj(0.0) < obj(log_t):
        log_t = 0.0
    on_edge = log_t - lo < SEARCH_TOL or hi - log_t < SEARCH_TOL
    return Temperature(math.exp(log_t), degenerate=z.shape[0] == 1 or on_edge)


def apply_temperature(T, logits) -> np.ndarray:
    t = T.T if isinstance(T, Temperature) else float(T)
    if not t > 0:
        raise ValueError("temperature must be positive")
    return softmax(np.asarray(logits, dtype=np.float64) / t)
