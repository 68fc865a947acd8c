"""Cox proportional hazards: Efron/Breslow partial likelihood, Newton fitting,
Breslow baseline hazard and survival prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, FitError, ValidationError

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 20.0


@dataclass(frozen=True)
class BaselineHazard:
    times: tuple
    cum_hazard: tuple

    def at(self, t) -> np.ndarray:
        """Cumulative baseline hazard evaluated at ``t`` (right-continuous steps)."""
        times = np.asarray(self.times)
        H = np.concatenate([[0.0], np.asarray(self.cum_hazard)])
        return H[np.searchsorted(times, np.asarray(t, dtype=float), side="right")]


@dataclass(frozen=True)
class CoxModel:
    beta: np.ndarray
    feature_names: tuple
    converged: bool
    iterations: int
    final_loglik: float
    ties: str = "efron"
    baseline: BaselineHazard | None = None

    def to_dict(self) -> dict:
        d = {
            "model": "cox",
            "version": 1,
            "beta": [float(b) for b in self.beta],
            "features": list(self.feature_names),
            "ties": self.ties,
            "converged": self.converged,
            "iterations": self.iterations,
            "loglik": self.final_loglik,
        }
        if self.baseline is not None:
            d["baseline"] = {
                "times": list(self.baseline.times),
                "cum_hazard": list(self.baseline.cum_hazard),
            }
        return d

    @classmethod
    def from_dict(cls, d) -> "CoxModel":
        base = d.get("baseline")
        return cls(
            beta=np.asarray(d["beta"], dtype=float),
            feature_names=tuple(d["features"]),
            converged=bool(d.get("converged", True)),
            iterations=int(d.get("iterations", 0)),
            final_loglik=float(d.get("loglik", float("nan"))),
            ties=d.get("ties", "efron"),
            baseline=None if base is None else BaselineHazard(tuple(base["times"]), tuple(base["cum_hazard"])),
        )


def _loglik_arrays(beta, X, times, status, ties="efron"):
    if ties not in ("efron", "breslow"):
        raise ValueError(f"unknown ties method {ties!r}")
    if not np.any(status == 1):
        raise FitError("no events")
    n, p = X.shape
    eta = X @ beta
    shift = eta.max()
    r = np.exp(eta - shift)
    value = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p))
    for t in np.unique(times[status == 1]):
        risk = times >= t
        dead = risk & (times == t) & (status == 1)
        d = int(dead.sum())
        rr, Xr = r[risk], X[risk]
        S0 = rr.sum()
        S1 = rr @ Xr
        S2 = (Xr * rr[:, None]).T @ Xr
        rd, Xd = r[dead], X[dead]
        T0 = rd.sum()
        T1 = rd @ Xd
        T2 = (Xd * rd[:, None]).T @ Xd
        value += (eta[dead] - shift).sum()
        grad += Xd.sum(axis=0)
        for l in range(d):
            phi = l / d if ties == "efron" else 0.0
            A0 = S0 - phi * T0
            A1 = S1 - phi * T1
            A2 = S2 - phi * T2
            value -= np.log(A0)
            grad -= A1 / A0
            hess -= A2 / A0 - np.outer(A1, A1) / A0 ** 2
    return float(value), grad, hess


def partial_loglik(beta, ds, ties: str = "efron"):
    """Log partial likelihood with analytic gradient and Hessian.

    Efron's tie correction by default; ``ties="breslow"`` gives the plain
    risk-set form. Both coincide when no event times are tied.
    """
    X = ds.covariates()
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise ValidationError(f"beta has shape {beta.shape}, expected ({X.shape[1]},)")
    return _loglik_arrays(beta, X, ds.times, ds.status, ties)


@dataclass
class CoxConfig:
    max_iter: int = 25
    tol: float = 1e-9
    grad_tol: float = 1e-8
    ties: str = "efron"
    ridge: float = 0.0
    max_halvings: int = 10


def _check_columns(X, names):
    for k, name in enumerate(names):
        if np.ptp(X[:, k]) == 0:
            raise ValidationError(f"zero-variance covariate: {name!r}")


def fit_cox(train, config: CoxConfig | None = None, **kwargs) -> CoxModel:
    """Maximise the partial likelihood by Newton-Raphson with step halving.

    Starts at beta = 0. Raises :class:`ConvergenceError` when a coefficient
    leaves [-20, 20] before convergence (monotone likelihood). The fitted
    model carries the Breslow baseline of ``train``.
    """
    cfg = config or CoxConfig(**kwargs)
    X = train.covariates()
    times, status = train.times, train.status
    if status.sum() < 2:
        raise FitError("Cox fit needs at least 2 events")
    _check_columns(X, train.feature_names)
    p = X.shape[1]

    def objective(b):
        v, g, h = _loglik_arrays(b, X, times, status, cfg.ties)
        if cfg.ridge:
            v -= 0.5 * cfg.ridge * b @ b
            g = g - cfg.ridge * b
            h = h - cfg.ridge * np.eye(p)
        return v, g, h

    beta = np.zeros(p)
    value, grad, hess = objective(beta)
    converged = np.max(np.abs(grad)) < cfg.grad_tol
    it = 0
    while not converged and it < cfg.max_iter:
        it += 1
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        for _ in range(cfg.max_halvings + 1):
            cand = beta + step
            c_value, c_grad, c_hess = objective(cand)
            if np.isfinite(c_value) and c_value >= value:
                break
            step = step / 2
        else:
            log.debug("step halving exhausted at iteration %d", it)
            break
        delta = c_value - value
        beta, value, grad, hess = cand, c_value, c_grad, c_hess
        if np.max(np.abs(beta)) > DIVERGENCE_BOUND:
            raise ConvergenceError("monotone partial likelihood; coefficient unbounded")
        converged = abs(delta) < cfg.tol or np.max(np.abs(grad)) < cfg.grad_tol
    if not converged:
        log.warning("Cox fit did not converge in %d iterations", it)
    loglik = _loglik_arrays(beta, X, times, status, cfg.ties)[0]
    model = CoxModel(beta, tuple(train.feature_names), bool(converged), it, loglik, cfg.ties)
    return replace(model, baseline=baseline_cumhaz(model, train))


def risk_score(model: CoxModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != model.beta.shape:
        raise ValidationError(f"covariate vector has shape {x.shape}, expected {model.beta.shape}")
    return float(model.beta @ x)


def risk_scores(model: CoxModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.beta):
        raise ValidationError(f"covariate matrix has shape {X.shape}, expected (n, {len(model.beta)})")
    return X @ model.beta


def baseline_cumhaz(model: CoxModel, train) -> BaselineHazard:
    """Breslow estimator ``H0(t) = sum_{t_j <= t} d_j / sum_{risk(t_j)} exp(eta_k)``."""
    X = train.covariates()
    if X.shape[1] != len(model.beta):
        raise ValidationError(
            f"training data has {X.shape[1]} covariates, model expects {len(model.beta)}"
        )
    times, status = train.times, train.status
    r = np.exp(X @ model.beta)
    out_t, out_h = [], []
    H = 0.0
    for t in np.unique(times[status == 1]):
        d = np.sum((times == t) & (status == 1))
        H += d / r[times >= t].sum()
        out_t.append(float(t))
        out_h.append(float(H))
    return BaselineHazard(tuple(out_t), tuple(out_h))


def survival_curve(model: CoxModel, x, times=None):
    """``S(t|x) = exp(-H0(t) exp(eta))`` at ``times`` (default: baseline jump times).

    Returns ``(times, survival)``.
    """
    if model.baseline is None:
        raise FitError("model has no baseline hazard; fit it with baseline_cumhaz")
    eta = risk_score(model, x)
    t = np.asarray(model.baseline.times if times is None else times, dtype=float)
    return t, np.exp(-model.baseline.at(t) * np.exp(eta))
