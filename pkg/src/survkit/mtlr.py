"""Multi-task logistic regression (MTLR) for discrete-time survival.

A subject's outcome is encoded over ``m`` time boundaries as a monotone
sequence ``y = (0, ..., 0, 1, ..., 1)`` where ``y_j = 1`` once the event has
happened by boundary ``tau_j``. With ``a_j = theta_j . x + b_j`` the sequence
whose first 1 sits at position ``k`` scores ``sum_{j >= k} a_j``; the ``m + 1``
legal sequences are normalised by a softmax. Sequence ``k`` (0-based) is the
event falling in interval ``(tau_k, tau_{k+1}]`` with ``tau_0 = 0`` and
``tau_{m+1} = inf``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import FitError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    boundaries: tuple

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.size < 1:
            raise ValidationError("time grid needs at least one boundary")
        if np.any(np.diff(b) <= 0):
            raise ValidationError("time grid boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", tuple(float(v) for v in b))

    @property
    def m(self) -> int:
        return len(self.boundaries)


def make_time_grid(train, m: int) -> TimeGrid:
    """Boundaries at the ``j/(m+1)`` empirical quantiles of the event times.

    ``m`` is capped at the number of distinct event times; quantiles use the
    inverse empirical CDF so every boundary is an observed event time, and
    coinciding quantiles are merged.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    ev = np.sort(train.times[train.status == 1])
    if ev.size == 0:
        raise FitError("no events; cannot build a time grid")
    m = min(m, np.unique(ev).size)
    q = np.arange(1, m + 1) / (m + 1)
    bounds = np.quantile(ev, q, method="inverted_cdf")
    return TimeGrid(tuple(np.unique(bounds)))


@dataclass(frozen=True)
class MTLRModel:
    grid: TimeGrid
    theta: np.ndarray  # (m, p)
    bias: np.ndarray  # (m,)
    reg_c: float
    feature_names: tuple
    objective_trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "model": "mtlr",
            "version": 1,
            "boundaries": list(self.grid.boundaries),
            "theta": [float(v) for v in self.theta.ravel()],
            "shape": list(self.theta.shape),
            "bias": [float(v) for v in self.bias],
            "reg_c": self.reg_c,
            "features": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d) -> "MTLRModel":
        shape = tuple(d["shape"])
        return cls(
            grid=TimeGrid(tuple(d["boundaries"])),
            theta=np.asarray(d["theta"], dtype=float).reshape(shape),
            bias=np.asarray(d["bias"], dtype=float),
            reg_c=float(d["reg_c"]),
            feature_names=tuple(d["features"]),
        )


def _sequence_scores(theta, bias, X):
    """Scores of the m+1 legal sequences, shape (n, m+1); last column is 0."""
    a = X @ theta.T + bias  # (n, m)
    n = a.shape[0]
    s = np.zeros((n, a.shape[1] + 1))
    s[:, :-1] = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
    return s


def admissible_start(grid: TimeGrid, times, status) -> np.ndarray:
    """First admissible sequence index per subject.

    Events are pinned to the interval containing their time. Censored
    subjects admit every sequence whose interval starts at or after their
    censoring time's interval.
    """
    tau = np.asarray(grid.boundaries)
    times = np.asarray(times, dtype=float)
    k_event = np.searchsorted(tau, times, side="left")
    k_cens = np.searchsorted(tau, times, side="right")
    return np.where(np.asarray(status) == 1, k_event, k_cens)


def _penalty(theta, reg_c):
    diff = np.diff(theta, axis=0)
    value = 0.5 * reg_c * (np.sum(diff ** 2) + np.sum(theta[0] ** 2))
    g = np.zeros_like(theta)
    g[0] += reg_c * theta[0]
    g[:-1] -= reg_c * diff
    g[1:] += reg_c * diff
    return value, g


def _loglik(theta, bias, X, k0, events, reg_c):
    s = _sequence_scores(theta, bias, X)
    n, m1 = s.shape
    cols = np.arange(m1)
    # events: mask a single column; censored: every column >= k0
    adm = np.where(events[:, None], cols[None, :] == k0[:, None], cols[None, :] >= k0[:, None])
    log_z = logsumexp(s, axis=1)
    s_adm = np.where(adm, s, -np.inf)
    log_num = logsumexp(s_adm, axis=1)
    value = float(np.sum(log_num - log_z))
    P = np.exp(s - log_z[:, None])
    Q = np.where(adm, np.exp(s_adm - log_num[:, None]), 0.0)
    # d s_k / d a_j = 1[j >= k]  =>  d ll / d a_j = sum_{k <= j} (Q_k - P_k)
    dA = np.cumsum(Q - P, axis=1)[:, :-1]
    g_theta = dA.T @ X
    g_bias = dA.sum(axis=0)
    pen, g_pen = _penalty(theta, reg_c)
    return value - pen, g_theta - g_pen, g_bias


def mtlr_loglik(theta, bias, ds, grid: TimeGrid, reg_c: float):
    """Penalised log-likelihood and its gradient ``(value, (d_theta, d_bias))``.

    The penalty is ``reg_c/2 * (sum_j ||theta_{j+1} - theta_j||^2 + ||theta_1||^2)``.
    """
    X = ds.covariates()
    theta = np.asarray(theta, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if theta.shape != (grid.m, X.shape[1]) or bias.shape != (grid.m,):
        raise ValidationError(
            f"parameters shaped {theta.shape}/{bias.shape}, expected ({grid.m}, {X.shape[1]})/({grid.m},)"
        )
    k0 = admissible_start(grid, ds.times, ds.status)
    value, g_theta, g_bias = _loglik(theta, bias, X, k0, ds.status == 1, reg_c)
    return value, (g_theta, g_bias)


@dataclass
class MTLRConfig:
    max_iter: int = 5000
    tol: float = 1e-7
    initial_step: float = 1.0


def fit_mtlr(train, grid: TimeGrid, reg_c: float = 1.0, config: MTLRConfig | None = None) -> MTLRModel:
    """Gradient ascent from zero with a backtracking step size.

    A step is accepted only if it does not lower the objective; the step
    grows after each success and halves after each rejection. Stops when an
    accepted step changes the objective by less than ``tol``.
    """
    if not reg_c > 0:
        raise ValidationError(f"reg_c must be positive, got {reg_c}")
    cfg = config or MTLRConfig()
    X = train.covariates()
    k0 = admissible_start(grid, train.times, train.status)
    events = train.status == 1
    m, p = grid.m, X.shape[1]
    theta = np.zeros((m, p))
    bias = np.zeros(m)
    value, g_t, g_b = _loglik(theta, bias, X, k0, events, reg_c)
    trace = [value]
    step = cfg.initial_step / max(len(train), 1)
    for _ in range(cfg.max_iter):
        gnorm2 = np.sum(g_t ** 2) + np.sum(g_b ** 2)
        if gnorm2 == 0:
            break
        accepted = False
        for _ in range(60):
            c_theta = theta + step * g_t
            c_bias = bias + step * g_b
            c_value, c_gt, c_gb = _loglik(c_theta, c_bias, X, k0, events, reg_c)
            if c_value >= value + 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        delta = c_value - value
        theta, bias, value, g_t, g_b = c_theta, c_bias, c_value, c_gt, c_gb
        trace.append(value)
        step *= 1.5
        if delta < cfg.tol:
            break
    else:
        log.warning("MTLR fit stopped at max_iter=%d", cfg.max_iter)
    return MTLRModel(grid, theta, bias, float(reg_c), tuple(train.feature_names), tuple(trace))


def sequence_probabilities(model: MTLRModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.theta.shape[1]:
        raise ValidationError(f"expected {model.theta.shape[1]} covariates, got {X.shape[1]}")
    s = _sequence_scores(model.theta, model.bias, X)
    return np.exp(s - logsumexp(s, axis=1, keepdims=True))


def survival_curves(model: MTLRModel, X) -> np.ndarray:
    """``S(tau_j | x)`` for each row of ``X``; shape (n, m)."""
    P = sequence_probabilities(model, X)
    tail = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
    return np.clip(tail[:, 1:], 0.0, 1.0)


def survival_curve_mtlr(model: MTLRModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("x must be a single covariate vector")
    return survival_curves(model, x[None, :])[0]


def risk_scores_mtlr(model: MTLRModel, X) -> np.ndarray:
    return -survival_curves(model, X).sum(axis=1)


def risk_score_mtlr(model: MTLRModel, x) -> float:
    """Negative summed survival over the grid; higher means earlier events."""
    return float(-survival_curve_mtlr(model, x).sum())


@dataclass(frozen=True)
class WeightMatrix:
    features: tuple
    boundaries: tuple
    values: np.ndarray  # (p, m)
    bias: np.ndarray  # (m,)

    def rows(self):
        """``(feature, boundary_time, weight)`` triples, bias last."""
        for f, name in enumerate(self.features):
            for j, t in enumerate(self.boundaries):
                yield name, t, float(self.values[f, j])
        for j, t in enumerate(self.boundaries):
            yield "bias", t, float(self.bias[j])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "boundary_time", "weight"])
            for name, t, v in self.rows():
                w.writerow([name, repr(float(t)), repr(v)])

    @classmethod
    def from_csv(cls, path) -> "WeightMatrix":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            recs = list(csv.DictReader(fh))
        bounds = []
        for r in recs:
            t = float(r["boundary_time"])
            if t not in bounds:
                bounds.append(t)
        feats = []
        for r in recs:
            if r["feature"] != "bias" and r["feature"] not in feats:
                feats.append(r["feature"])
        vals = np.zeros((len(feats), len(bounds)))
        bias = np.zeros(len(bounds))
        for r in recs:
            j = bounds.index(float(r["boundary_time"]))
            if r["feature"] == "bias":
                bias[j] = float(r["weight"])
            else:
                vals[feats.index(r["feature"]), j] = float(r["weight"])
        return cls(tuple(feats), tuple(bounds), vals, bias)


def weight_matrix(model: MTLRModel) -> WeightMatrix:
    """Per-feature coefficients at each boundary time, plus the bias row."""
    return WeightMatrix(
        tuple(model.feature_names), model.grid.boundaries, model.theta.T.copy(), model.bias.copy()
    )
