"""Deterministic fixtures and synthetic proportional-hazards cohorts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import REFERENCE_FEATURES, SurvivalDataset
from .errors import ValidationError

# 12 events spread over (10, 50], three at risk-set sizes 10, 9, 8, one more
# at 108, and six subjects censored at the 120-month horizon.
TABLE1_EVENT_TIMES = (13, 16, 19, 22, 25, 28, 31, 34, 37, 40, 43, 46, 101, 102, 103, 108)
TABLE1_CENSOR_TIME = 120
TABLE1_N_CENSORED = 6
TABLE1_QUERY_TIMES = (10, 50, 80, 105, 108, 111)


def table1_replica() -> SurvivalDataset:
    """22-subject cohort whose Kaplan-Meier summary matches the published table.

    Covariates are placeholders drawn from a fixed-seed normal so the cohort
    also runs through the model pipeline; the product-limit fit ignores them.
    """
    times = list(TABLE1_EVENT_TIMES) + [TABLE1_CENSOR_TIME] * TABLE1_N_CENSORED
    status = [1] * len(TABLE1_EVENT_TIMES) + [0] * TABLE1_N_CENSORED
    X = np.round(np.random.default_rng(20130101).normal(size=(len(times), len(REFERENCE_FEATURES))), 6)
    ids = [f"R{i + 1:02d}" for i in range(len(times))]
    return SurvivalDataset.from_arrays(times, status, X, REFERENCE_FEATURES, ids)


@dataclass(frozen=True)
class WeibullConfig:
    n: int
    beta: tuple
    shape: float = 1.0
    scale: float = 100.0
    censor_time: int = 120
    covariate_law: str = "normal"  # or "uniform"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.n < 2:
            raise ValidationError("n must be >= 2")
        if not (self.shape > 0 and self.scale > 0 and self.censor_time > 0):
            raise ValidationError("shape, scale and censor_time must be positive")
        if self.covariate_law not in ("normal", "uniform"):
            raise ValidationError(f"covariate_law must be 'normal' or 'uniform', got {self.covariate_law!r}")


def generate_weibull(cfg: WeibullConfig, log_hazard=None) -> SurvivalDataset:
    """Weibull proportional-hazards cohort with administrative censoring.

    Latent ``T = scale * (-log U / exp(eta))**(1/shape)`` with
    ``eta = X @ beta``, or ``eta = log_hazard(X)`` when a callable is given.
    Observed time is ``min(ceil(T), censor_time)`` (at least 1) and status is
    1 iff ``T <= censor_time``.
    """
    rng = np.random.default_rng(cfg.seed)
    p = len(cfg.beta)
    if cfg.covariate_law == "normal":
        X = rng.standard_normal((cfg.n, p))
    else:
        X = rng.uniform(-1.0, 1.0, (cfg.n, p))
    U = rng.uniform(size=cfg.n)
    U = np.where(U > 0, U, np.finfo(float).tiny)
    eta = X @ np.asarray(cfg.beta) if log_hazard is None else np.asarray(log_hazard(X), dtype=float)
    T = cfg.scale * (-np.log(U) / np.exp(eta)) ** (1.0 / cfg.shape)
    status = (T <= cfg.censor_time).astype(int)
    obs = np.where(status == 1, np.maximum(np.ceil(T), 1), cfg.censor_time).astype(int)
    return SurvivalDataset.from_arrays(obs, status, X, [f"x{k + 1}" for k in range(p)])


def censoring_scale(beta, shape, censor_time, fraction, covariate_law="normal", n_mc=200_000, seed=12345):
    """Weibull scale giving an expected administrative-censoring ``fraction``.

    Solves ``E[exp(-(c/scale)**shape * exp(eta))] = fraction`` by bisection on
    a fixed Monte Carlo sample of ``eta``.
    """
    rng = np.random.default_rng(seed)
    p = len(beta)
    X = rng.standard_normal((n_mc, p)) if covariate_law == "normal" else rng.uniform(-1, 1, (n_mc, p))
    r = np.exp(X @ np.asarray(beta, dtype=float))

    def frac(log_scale):
        return np.mean(np.exp(-((censor_time / math.exp(log_scale)) ** shape) * r))

    lo, hi = math.log(censor_time) - 20, math.log(censor_time) + 20
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if frac(mid) < fraction:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))
