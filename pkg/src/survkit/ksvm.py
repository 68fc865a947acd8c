"""Kernel survival SVM, ranking formulation.

The score ``f(x) = sum_i alpha_i K(x_i, x) + b`` is trained so that, for
every comparable pair (i, j) where i had the event before j's time,
``f(x_i) - f(x_j) >= 1`` up to hinge slack:

    min_alpha  1/2 alpha' K alpha + C * sum_pairs max(0, 1 - (f(x_i) - f(x_j)))

The bias cancels in every pair difference, so it is not learned (kept at 0).
Training runs stochastic dual coordinate ascent over the pairs: one box
constrained dual variable per pair, visited in a seeded random order each
epoch, which keeps the pair-wise stochastic character of subgradient
training while converging to the exact optimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NoComparablePairsError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None  # rbf width; None means 1/p at fit time
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "polynomial"):
            raise ValidationError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ValidationError("rbf gamma must be positive")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValidationError("polynomial degree must be >= 1")

    def resolved(self, p: int) -> "KernelSpec":
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec("rbf", 1.0 / max(p, 1), self.degree, self.coef0)
        return self

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}


def gram(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValidationError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    spec = spec.resolved(A.shape[1])
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        return (A @ B.T + spec.coef0) ** spec.degree
    sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2 * A @ B.T
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    spec = spec.resolved(x.size)
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "polynomial":
        return float((x @ y + spec.coef0) ** spec.degree)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def comparable_pairs_surv(times, status) -> np.ndarray:
    """All ``(i, j)`` (0-based) with ``T_i < T_j`` and ``status_i == 1``; shape (P, 2)."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(status, dtype=int)
    i, j = np.nonzero((t[:, None] < t[None, :]) & (d[:, None] == 1))
    return np.column_stack([i, j])


@dataclass(frozen=True)
class KSVMModel:
    alphas: np.ndarray
    bias: float
    support_rows: np.ndarray
    kernel: KernelSpec
    reg_c: float
    feature_names: tuple = ()
    objective_trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "model": "ksvm",
            "version": 1,
            "kernel": self.kernel.to_dict(),
            "reg_c": self.reg_c,
            "alphas": [float(a) for a in self.alphas],
            "bias": float(self.bias),
            "support_rows": [[float(v) for v in row] for row in self.support_rows],
            "features": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d) -> "KSVMModel":
        k = d["kernel"]
        p = len(d["features"])
        return cls(
            np.asarray(d["alphas"], dtype=float),
            float(d["bias"]),
            np.asarray(d["support_rows"], dtype=float).reshape(-1, p),
            KernelSpec(k["kind"], k["gamma"], k["degree"], k["coef0"]),
            float(d["reg_c"]),
            tuple(d["features"]),
        )


@dataclass
class KSVMConfig:
    epochs: int = 500
    seed: int = 0
    tol: float = 1e-8


@njit(cache=True)
def _sdca_epoch(order, pi, pj, q, lam, alphas, f, K, reg_c):
    n = f.shape[0]
    for p in order:
        if q[p] <= 0.0:
            continue
        i = pi[p]
        j = pj[p]
        new = lam[p] + (1.0 - (f[i] - f[j])) / q[p]
        if new < 0.0:
            new = 0.0
        elif new > reg_c:
            new = reg_c
        delta = new - lam[p]
        if delta != 0.0:
            lam[p] = new
            alphas[i] += delta
            alphas[j] -= delta
            for k in range(n):
                f[k] += delta * (K[k, i] - K[k, j])


def primal_objective(alphas, K, pairs, reg_c) -> float:
    f = K @ alphas
    margins = f[pairs[:, 0]] - f[pairs[:, 1]]
    return float(0.5 * alphas @ f + reg_c * np.sum(np.maximum(0.0, 1.0 - margins)))


def fit_ksvm(train, kernel: KernelSpec | None = None, reg_c: float = 1.0,
             config: KSVMConfig | None = None) -> KSVMModel:
    """Fit the ranking SVM; deterministic for a fixed ``config.seed``.

    Stops early once every pair satisfies the optimality conditions to
    within ``config.tol``.
    """
    if not reg_c > 0:
        raise ValidationError(f"reg_c must be positive, got {reg_c}")
    cfg = config or KSVMConfig()
    X = train.covariates()
    kernel = (kernel or KernelSpec()).resolved(X.shape[1])
    pairs = comparable_pairs_surv(train.times, train.status)
    if len(pairs) == 0:
        raise NoComparablePairsError("no comparable pairs; all censored or degenerate")
    K = gram(kernel, X, X)
    n = len(X)
    P = len(pairs)
    pi, pj = pairs[:, 0], pairs[:, 1]
    q = K[pi, pi] + K[pj, pj] - 2 * K[pi, pj]
    lam = np.zeros(P)
    alphas = np.zeros(n)
    f = np.zeros(n)
    rng = np.random.default_rng(cfg.seed)
    trace = [primal_objective(alphas, K, pairs, reg_c)]
    for epoch in range(cfg.epochs):
        _sdca_epoch(rng.permutation(P), pi, pj, q, lam, alphas, f, K, float(reg_c))
        # refresh to shed accumulated rounding from the incremental updates
        f = K @ alphas
        trace.append(primal_objective(alphas, K, pairs, reg_c))
        g = 1.0 - (f[pi] - f[pj])  # dual gradient per pair
        viol = np.where(lam <= 0, np.maximum(g, 0.0), np.where(lam >= reg_c, np.maximum(-g, 0.0), np.abs(g)))
        viol = np.where(q > 0, viol, 0.0)
        if viol.max() < cfg.tol:
            break
    else:
        log.info("kernel SVM reached %d epochs (max KKT violation %.2e)", cfg.epochs, viol.max())
    return KSVMModel(alphas, 0.0, X.copy(), kernel, float(reg_c), tuple(train.feature_names), tuple(trace))


def scores_ksvm(model: KSVMModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.support_rows.shape[1]:
        raise ValidationError(f"expected {model.support_rows.shape[1]} covariates, got {X.shape[1]}")
    if len(model.alphas) == 0:
        return np.full(len(X), model.bias)
    return gram(model.kernel, X, model.support_rows) @ model.alphas + model.bias


def score_ksvm(model: KSVMModel, x) -> float:
    """Risk score; higher means an earlier expected event."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("x must be a single covariate vector")
    return float(scores_ksvm(model, x[None, :])[0])
