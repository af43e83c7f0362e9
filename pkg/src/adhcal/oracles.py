"""Numerical checks for the gradient-rescaling and ECE2-entropy bounds.

Gradient rescaling: with ``q = softmax(beta z)`` and ``p = softmax(z)``, the
per-logit ratio ``gamma_j = (q - onehot)_j / (p - onehot)_j`` satisfies
``d CE(beta z, y) / dz = beta * gamma * d CE(z, y) / dz``. The bound constants
``c0..c3`` bracket ``gamma`` when ``y`` is the argmax of ``z``; two printed
forms of ``c2, c3`` exist and both are evaluated.

ECE2 bound: ``sqrt(sum f (acc - p)^2) <= sqrt(C - 2 H)`` with
``C = 3 - 2 E[log p] - E[f(p)]``, evaluated on discrete confidence PMFs.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .losses import LossKind, loss_and_grad, per_sample_loss

FD_STEP = 1e-5
ABS_FLOOR = 1e-12
VARIANTS = ("top_gap", "raw_logit")


class HypothesisError(ValueError):
    """The label is not the unique argmax of the logits."""


# ---------------------------------------------------------------------------
# gradient-rescaling ratio


def _lse_excluding(z, y):
    mask = np.ones(z.shape[-1], dtype=bool)
    mask[y] = False
    return logsumexp(z[mask])


def gamma_exact(z, y: int, beta: float) -> np.ndarray:
    """Componentwise ratio of the annealed to the plain CE logit gradient.

    Evaluated in log space so it stays finite where the softmax saturates.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < 2:
        raise ValueError("need at least two classes")
    lse_z = logsumexp(z)
    lse_bz = logsumexp(beta * z)
    gam = np.exp((beta - 1.0) * z + lse_z - lse_bz)
    gam[y] = np.exp(_lse_excluding(beta * z, y) + lse_z - lse_bz - _lse_excluding(z, y))
    return gam


def gamma_from_losses(z, y: int, beta: float):
    """The same ratio computed from the loss gradients.

    Returns ``(gamma, n_flagged)``; components whose plain CE gradient
    underflows to 0 are set to nan and counted.
    """
    _, g_ce = loss_and_grad(LossKind("ce"), z, y)
    _, g_adh = loss_and_grad(LossKind("adh", beta=beta), z, y)
    bad = g_ce == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        gam = np.where(bad, np.nan, g_adh / (beta * g_ce))
    return gam, int(bad.sum())


@dataclass
class GammaBounds:
    gamma: np.ndarray
    lower: np.ndarray       # c0 at y, c2 elsewhere
    upper: np.ndarray       # c1 at y, c3 elsewhere
    label: int
    variant: str

    def holds(self, rtol: float = 1e-12) -> np.ndarray:
        lo_ok = self.gamma >= self.lower * (1.0 - rtol)
        hi_ok = self.gamma <= self.upper * (1.0 + rtol)
        return lo_ok & hi_ok


def _check_argmax(z, y):
    top = z.max()
    if z[y] != top:
        raise HypothesisError(f"label {y} is not the argmax of z")
    if np.count_nonzero(z == top) > 1:
        raise HypothesisError("argmax of z is tied")


def gamma_bounds(z, y: int, beta: float, variant: str = "top_gap") -> GammaBounds:
    """Bound constants for every class.

    ``top_gap`` uses ``exp[(1 - beta)(z_(n) - z_i)]`` as the off-label factor;
    ``raw_logit`` uses ``exp[(beta - 1) z_i]``.
    """
    z = np.asarray(z, dtype=np.float64)
    _check_argmax(z, y)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    n = z.shape[0]
    s = np.sort(z)
    z1, zn1, zn = s[0], s[-2], s[-1]
    d1 = (1.0 - beta) * (z - z1)
    dn1 = (1.0 - beta) * (z - zn1)
    c0 = np.exp(d1 - (zn1 - z1)) / n
    c1 = n * np.exp(dn1 + (zn1 - z1))
    if variant == "top_gap":
        factor = np.exp((1.0 - beta) * (zn - z))
    else:
        factor = np.exp((beta - 1.0) * z)
    c2 = (1.0 / n + (n - 1.0) / n * np.exp(z1 - zn)) * factor
    c3 = (1.0 + (n - 1.0) * np.exp(zn1 - zn)) * factor
    lower, upper = c2.copy(), c3.copy()
    lower[y], upper[y] = c0[y], c1[y]
    return GammaBounds(gamma_exact(z, y, beta), lower, upper, y, variant)


@dataclass
class Theorem1Report:
    trials: int
    seed: int
    equality_max_rel_err: float
    equality_failures: int
    flagged: int
    census: dict = field(default_factory=dict)
    counterexamples: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_logits(rng, n_range=(2, 10), beta_range=(0.5, 2.0), scale=3.0):
    """Random ``(z, y, beta)`` with ``y`` the unique argmax of ``z``."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    z = rng.normal(0.0, scale, size=n)
    beta = float(rng.uniform(*beta_range))
    return z, int(np.argmax(z)), beta


def check_theorem1(trials: int = 10_000, n_range=(2, 10), beta_range=(0.5, 2.0),
                   seed: int = 0, equality_rtol: float = 1e-9,
                   max_counterexamples: int = 20) -> Theorem1Report:
    """Check the gradient equality on every trial and census both bound variants.

    The equality ``grad CE(beta z) = beta * gamma * grad CE(z)`` is tested
    against the losses module; the bounds are tallied per variant and class
    role (``label`` vs ``other``), with the first counterexamples kept verbatim.
    """
    rng = np.random.default_rng(seed)
    worst, eq_fail, flagged = 0.0, 0, 0
    census = {v: {"label_checked": 0, "label_violations": 0,
                  "other_checked": 0, "other_violations": 0} for v in VARIANTS}
    examples = {v: [] for v in VARIANTS}
    for _ in range(trials):
        z, y, beta = sample_logits(rng, n_range, beta_range)
        gam = gamma_exact(z, y, beta)
        _, g_ce = loss_and_grad(LossKind("ce"), z, y)
        _, g_adh = loss_and_grad(LossKind("adh", beta=beta), z, y)
        ok = g_ce != 0.0
        flagged += int((~ok).sum())
        pred = beta * gam[ok] * g_ce[ok]
        rel = np.abs(g_adh[ok] - pred) / np.maximum(np.abs(g_adh[ok]), ABS_FLOOR)
        if rel.size:
            worst = max(worst, float(rel.max()))
            eq_fail += int((rel > equality_rtol).sum())
        for variant in VARIANTS:
            b = gamma_bounds(z, y, beta, variant)
            held = b.holds()
            c = census[variant]
            c["label_checked"] += 1
            c["other_checked"] += z.size - 1
            c["label_violations"] += int(not held[y])
            c["other_violations"] += int((~held).sum() - (not held[y]))
            if not held.all() and len(examples[variant]) < max_counterexamples:
                examples[variant].append({
                    "z": z.tolist(), "y": y, "beta": beta,
                    "gamma": b.gamma.tolist(), "lower": b.lower.tolist(),
                    "upper": b.upper.tolist(),
                    "violating": np.flatnonzero(~held).tolist(),
                })
    return Theorem1Report(trials, seed, worst, eq_fail, flagged, census, examples)


def annealed_grad_norms(z, y, beta: float) -> np.ndarray:
    """Per-sample 2-norm of d CE(beta z, y) / dz for a batch of logits."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    y = np.atleast_1d(y)
    norms = np.empty(len(z))
    for i, (zi, yi) in enumerate(zip(z, y)):
        norms[i] = np.linalg.norm(loss_and_grad(LossKind("adh", beta=beta), zi, yi)[1])
    return norms


# ---------------------------------------------------------------------------
# ECE2 entropy bound


@dataclass
class Ece2BoundReport:
    lhs: float
    lhs_expanded: float
    rhs: float
    radicand: float
    C: float
    H: float
    holds: bool
    margin: float


def ece2_definition(support, masses, acc) -> float:
    p, f, a = (np.asarray(v, dtype=np.float64) for v in (support, masses, acc))
    return float(np.sqrt(np.sum(f * (a - p) ** 2)))


def ece2_squared_expansion(support, masses, acc) -> float:
    """sum f a^2 - 2 sum f a p + sum f p^2, term by term."""
    p, f, a = (np.asarray(v, dtype=np.float64) for v in (support, masses, acc))
    return float(np.sum(f * a * a) - 2.0 * np.sum(f * a * p) + np.sum(f * p * p))


def check_theorem2(support, masses, acc, shannon: bool = True) -> Ece2BoundReport:
    """Evaluate both sides of the ECE2 bound for a discrete confidence PMF.

    ``shannon=True`` takes ``H = -sum f log f``; ``False`` takes the literal
    ``E[log f] = sum f log f``. A negative radicand counts as a violation and
    ``rhs`` is reported as nan.
    """
    p, f, a = (np.asarray(v, dtype=np.float64) for v in (support, masses, acc))
    if ((p <= 0) | (p > 1)).any():
        raise ValueError("support values must lie in (0, 1]")
    if ((a < 0) | (a > 1)).any():
        raise ValueError("accuracies must lie in [0, 1]")
    if (f <= 0).any() or abs(f.sum() - 1.0) > 1e-12:
        raise ValueError("masses must be positive and sum to 1")
    lhs = ece2_definition(p, f, a)
    lhs_sq = ece2_squared_expansion(p, f, a)
    C = 3.0 - 2.0 * np.sum(f * np.log(p)) - np.sum(f * f)
    flogf = np.sum(f * np.log(f))
    H = -flogf if shannon else flogf
    radicand = float(C - 2.0 * H)
    rhs = float(np.sqrt(radicand)) if radicand >= 0 else float("nan")
    holds = radicand >= 0 and lhs <= rhs
    margin = rhs - lhs if radicand >= 0 else float("nan")
    return Ece2BoundReport(lhs, float(np.sqrt(max(lhs_sq, 0.0))), rhs, radicand,
                           float(C), float(H), bool(holds), float(margin))


def theorem2_grid(support_step=0.05, mass_step=0.05, acc_step=0.1, shannon=True):
    """All 2-point PMFs on the given grids, vectorized.

    Supports are ordered pairs ``p1 < p2`` from ``support_step..1``, ``f1`` runs
    over the interior of the mass grid, and each accuracy is on ``0..1``.
    Returns a dict of equal-length columns.
    """
    ps = np.round(np.arange(1, round(1 / support_step) + 1) * support_step, 12)
    fs = np.round(np.arange(1, round(1 / mass_step)) * mass_step, 12)
    accs = np.round(np.arange(0, round(1 / acc_step) + 1) * acc_step, 12)
    pairs = [(a, b) for a, b in itertools.combinations(ps, 2)]
    grid = np.array([(p1, p2, f1, a1, a2) for (p1, p2) in pairs for f1 in fs
                     for a1 in accs for a2 in accs])
    p1, p2, f1, a1, a2 = grid.T
    f2 = 1.0 - f1
    lhs_sq = f1 * (a1 - p1) ** 2 + f2 * (a2 - p2) ** 2
    expanded = (f1 * a1 * a1 + f2 * a2 * a2) - 2.0 * (f1 * a1 * p1 + f2 * a2 * p2) \
        + (f1 * p1 * p1 + f2 * p2 * p2)
    C = 3.0 - 2.0 * (f1 * np.log(p1) + f2 * np.log(p2)) - (f1 * f1 + f2 * f2)
    flogf = f1 * np.log(f1) + f2 * np.log(f2)
    H = -flogf if shannon else flogf
    radicand = C - 2.0 * H
    lhs = np.sqrt(lhs_sq)
    with np.errstate(invalid="ignore"):
        rhs = np.sqrt(radicand)
    holds = (radicand >= 0) & (lhs <= rhs)
    return {"p1": p1, "p2": p2, "f1": f1, "acc1": a1, "acc2": a2,
            "lhs": lhs, "lhs_sq": lhs_sq, "lhs_sq_expanded": expanded,
            "C": C, "H": H, "radicand": radicand, "rhs": rhs, "holds": holds}


def grid_to_csv(cols: dict) -> str:
    """CSV of the grid columns; floats as repr, the ``holds`` flag as 0/1."""
    names = [k for k in cols if k != "lhs_sq_expanded"]
    text_cols = []
    for k in names:
        v = np.asarray(cols[k])
        if v.dtype == bool:
            text_cols.append(list(map(str, v.astype(int).tolist())))
        else:
            text_cols.append(list(map(repr, v.astype(np.float64).tolist())))
    lines = [",".join(names)]
    lines.extend(map(",".join, zip(*text_cols)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# finite-difference gradient checks


@dataclass
class GradCheckResult:
    passed: bool
    worst_error: float
    n_checked: int


def finite_difference(f, x, step: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar function ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = f(x)
        flat[i] = old - step
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2.0 * step)
    return g


def compare_gradients(analytic, numeric, abs_floor: float = ABS_FLOOR) -> float:
    """Max absolute difference over the larger gradient's max magnitude.

    Falls back to the plain absolute difference when both gradients are below
    ``abs_floor`` (a flat region where a ratio is meaningless).
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    diff = float(np.abs(a - n).max())
    scale = float(max(np.abs(a).max(), np.abs(n).max()))
    return diff if scale < abs_floor else diff / scale


def grad_check(f_and_grad, x, tolerance: float = 1e-4, step: float = FD_STEP,
               abs_floor: float = ABS_FLOOR) -> GradCheckResult:
    """Compare ``f_and_grad(x) -> (value, grad)`` with central differences.

    If ``f_and_grad`` carries a ``values`` attribute, a callable mapping a stack
    of parameter vectors ``[M x P]`` to ``M`` values (as built by
    ``net_objective``), all perturbed points are evaluated in one call.
    """
    x = np.asarray(x, dtype=np.float64)
    _, analytic = f_and_grad(x.copy())
    batched = getattr(f_and_grad, "values", None)
    if batched is not None:
        flat = x.ravel()
        shifts = step * np.eye(flat.size)
        v = batched(np.vstack([flat + shifts, flat - shifts]))
        numeric = ((v[:flat.size] - v[flat.size:]) / (2.0 * step)).reshape(x.shape)
    else:
        numeric = finite_difference(lambda v: f_and_grad(v)[0], x, step)
    worst = compare_gradients(analytic, numeric, abs_floor)
    return GradCheckResult(worst < tolerance, worst, x.size)


def kink_margin(net, inputs) -> float:
    """Smallest |pre-activation| feeding a ReLU, over the whole batch.

    Central differences straddling a kink disagree with the one-sided analytic
    gradient, so checks should draw inputs with a margin well above the step.
    """
    from . import nn

    _, cache = nn.forward(net, inputs)
    margins = [np.abs(a).min() for a, layer in zip(cache.preacts, net.layers)
               if layer.activation == "relu"]
    return float(min(margins)) if margins else math.inf


def net_objective(net, inputs, labels, kind: LossKind):
    """``(value, grad)`` of the mean batch loss as a function of the flat parameters."""
    from . import nn

    def f(flat):
        net.set_flat(flat)
        out, cache = nn.forward(net, inputs)
        value, g = loss_and_grad(kind, out, labels)
        grads = nn.backward(net, cache, g)
        return value, np.concatenate([p.ravel() for p in grads])

    shapes = [(l.weight.shape, l.bias.shape, l.activation) for l in net.layers]
    x0 = np.asarray(inputs, dtype=np.float64)
    y0 = np.atleast_1d(np.asarray(labels, dtype=np.int64))

    def values(flats):
        # the same forward pass, written out over a leading stack axis
        flats = np.asarray(flats, dtype=np.float64)
        m = len(flats)
        h = np.broadcast_to(x0, (m, *x0.shape))
        pos = 0
        for (ws, bs, act) in shapes:
            nw, nb = ws[0] * ws[1], bs[0]
            w = flats[:, pos:pos + nw].reshape(m, *ws)
            b = flats[:, pos + nw:pos + nw + nb]
            pos += nw + nb
            h = h @ w.transpose(0, 2, 1) + b[:, None, :]
            if act == "relu":
                h = np.maximum(h, 0.0)
        per = per_sample_loss(kind, h.reshape(-1, h.shape[-1]), np.tile(y0, m))
        return per.reshape(m, -1).mean(axis=1)

    f.values = values
    return f
