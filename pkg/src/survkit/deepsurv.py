"""DeepSurv: a feed-forward log-risk network trained on the Cox partial likelihood."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, FitError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkSpec:
    hidden_sizes: tuple = (16, 16)
    activation: str = "relu"
    weight_decay: float = 1e-4
    learning_rate: float = 1e-2
    epochs: int = 2000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValidationError("hidden layer widths must be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise ValidationError(f"activation must be 'relu' or 'tanh', got {self.activation!r}")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z, a, kind):
    return (z > 0).astype(float) if kind == "relu" else 1.0 - a ** 2


def init_params(spec: NetworkSpec, n_in: int):
    """Fan-in scaled uniform weights, zero biases; one (W, b) per layer."""
    rng = np.random.default_rng(spec.seed)
    sizes = [n_in, *spec.hidden_sizes, 1]
    gain = 6.0 if spec.activation == "relu" else 3.0
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(gain / fan_in)
        params.append((rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def _forward(params, X, kind):
    """Log-risk per row plus the cached pre/post activations."""
    cache = [(None, X)]
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        h = z if i == len(params) - 1 else _act(z, kind)
        cache.append((z, h))
    return h[:, 0], cache


def _backward(params, cache, g_eta, kind):
    grads = [None] * len(params)
    delta = g_eta[:, None]
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        h_prev = cache[i][1]
        grads[i] = (h_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            z, a = cache[i]
            delta = (delta @ W.T) * _act_grad(z, a, kind)
    return grads


def cox_loss(etas, times, status):
    """Negative Breslow log partial likelihood and its gradient in ``etas``."""
    eta = np.asarray(etas, dtype=float)
    t = np.asarray(times, dtype=float)
    d = np.asarray(status, dtype=int)
    if not np.any(d == 1):
        raise FitError("no events")
    order = np.argsort(-t, kind="stable")
    eta_s, t_s, d_s = eta[order], t[order], d[order]
    shift = eta_s.max()
    r = np.exp(eta_s - shift)
    cum = np.cumsum(r)
    # risk set of time t is every subject with time >= t: in descending
    # order, up to the last position holding time t
    last = np.searchsorted(-t_s, -t_s, side="right") - 1
    S0 = cum[last]
    ev = d_s == 1
    value = -np.sum(eta_s[ev] - shift - np.log(S0[ev]))
    # d/d eta_k of sum_i log S0_i = r_k * sum_{i event, risk(i) contains k} 1/S0_i
    inv = np.where(ev, 1.0 / S0, 0.0)
    # subject k is in risk(i) iff t_k >= t_i: ascending-time cumulative sum
    asc = np.argsort(t_s, kind="stable")
    ts_asc = t_s[asc]
    csum = np.cumsum(inv[asc])
    pos = np.searchsorted(ts_asc, t_s, side="right") - 1
    acc = csum[pos]
    g_sorted = -(ev.astype(float)) + r * acc
    grad = np.empty_like(eta)
    grad[order] = g_sorted
    return float(value), grad


@dataclass(frozen=True)
class DeepSurvModel:
    spec: NetworkSpec
    layers: tuple  # ((W, b), ...)
    feature_names: tuple
    training_loss_trace: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "model": "deepsurv",
            "version": 1,
            "spec": {
                "hidden_sizes": list(self.spec.hidden_sizes),
                "activation": self.spec.activation,
                "weight_decay": self.spec.weight_decay,
                "learning_rate": self.spec.learning_rate,
                "epochs": self.spec.epochs,
                "seed": self.spec.seed,
            },
            "features": list(self.feature_names),
            "layers": [
                {"shape": list(W.shape), "weights": [float(v) for v in W.ravel()], "bias": [float(v) for v in b]}
                for W, b in self.layers
            ],
            "final_loss": self.training_loss_trace[-1] if self.training_loss_trace else None,
        }

    @classmethod
    def from_dict(cls, d) -> "DeepSurvModel":
        s = d["spec"]
        spec = NetworkSpec(tuple(s["hidden_sizes"]), s["activation"], s["weight_decay"],
                           s["learning_rate"], s["epochs"], s["seed"])
        layers = tuple(
            (np.asarray(L["weights"], dtype=float).reshape(L["shape"]), np.asarray(L["bias"], dtype=float))
            for L in d["layers"]
        )
        return cls(spec, layers, tuple(d["features"]))


def forward(model: DeepSurvModel, x) -> float:
    x = np.asarray(x, dtype=float)
    n_in = model.layers[0][0].shape[0]
    if x.shape != (n_in,):
        raise ValidationError(f"covariate vector has shape {x.shape}, expected ({n_in},)")
    return float(_forward(model.layers, x[None, :], model.spec.activation)[0][0])


def risk_scores_ds(model: DeepSurvModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_in = model.layers[0][0].shape[0]
    if X.shape[1] != n_in:
        raise ValidationError(f"expected {n_in} covariates, got {X.shape[1]}")
    return _forward(model.layers, X, model.spec.activation)[0]


def risk_score_ds(model: DeepSurvModel, x) -> float:
    return forward(model, x)


def objective(params, X, times, status, spec: NetworkSpec):
    """Training objective ``cox_loss + weight_decay * ||params||^2`` with gradients."""
    eta, cache = _forward(params, X, spec.activation)
    value, g_eta = cox_loss(eta, times, status)
    grads = _backward(params, cache, g_eta, spec.activation)
    if spec.weight_decay:
        wd = spec.weight_decay
        value += wd * sum(np.sum(W ** 2) + np.sum(b ** 2) for W, b in params)
        grads = [(gW + 2 * wd * W, gb + 2 * wd * b) for (gW, gb), (W, b) in zip(grads, params)]
    return value, grads


def fit_deepsurv(train, spec: NetworkSpec | None = None) -> DeepSurvModel:
    """Full-batch Adam with a monotone safeguard.

    A proposed update that raises the objective is rejected and the step
    multiplier halved; accepted updates let it recover toward 1. The loss
    trace is therefore non-increasing.
    """
    spec = spec or NetworkSpec()
    X = train.covariates()
    times, status = train.times, train.status
    if status.sum() < 2:
        raise FitError("DeepSurv needs at least 2 events")
    params = init_params(spec, X.shape[1])
    flat = [a for layer in params for a in layer]
    m1 = [np.zeros_like(a) for a in flat]
    m2 = [np.zeros_like(a) for a in flat]
    b1, b2, eps = 0.9, 0.999, 1e-8
    value, grads = objective(params, X, times, status, spec)
    trace = [value]
    scale = 1.0
    step_t = 0
    for _ in range(spec.epochs):
        if not np.isfinite(value):
            raise ConvergenceError("training diverged; reduce learning_rate")
        step_t += 1
        g_flat = [g for layer in grads for g in layer]
        updates = []
        for k, g in enumerate(g_flat):
            m1[k] = b1 * m1[k] + (1 - b1) * g
            m2[k] = b2 * m2[k] + (1 - b2) * g * g
            mh = m1[k] / (1 - b1 ** step_t)
            vh = m2[k] / (1 - b2 ** step_t)
            updates.append(mh / (np.sqrt(vh) + eps))
        for _ in range(30):
            lr = spec.learning_rate * scale
            cand_flat = [a - lr * u for a, u in zip(flat, updates)]
            cand = [(cand_flat[2 * i], cand_flat[2 * i + 1]) for i in range(len(params))]
            c_value, c_grads = objective(cand, X, times, status, spec)
            if np.isfinite(c_value) and c_value <= value:
                break
            scale *= 0.5
        else:
            break
        flat, params, value, grads = cand_flat, cand, c_value, c_grads
        trace.append(value)
        scale = min(1.0, scale * 2.0)
    if not np.isfinite(value):
        raise ConvergenceError("training diverged; reduce learning_rate")
    return DeepSurvModel(spec, tuple(params), tuple(train.feature_names), tuple(trace))
