"""Kaplan-Meier product-limit estimation with Greenwood standard errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


@dataclass(frozen=True)
class KMStep:
    time: float
    n_risk: int
    n_event: int
    survival: float
    std_error: float


@dataclass(frozen=True)
class KMCurve:
    steps: tuple
    n_total: int
    # sorted observed times (events and censorings), for exact risk counts
    observed: tuple = ()

    def survival_at(self, t: float) -> float:
        s = 1.0
        for step in self.steps:
            if step.time > t:
                break
            s = step.survival
        return s

    def step_at(self, t: float):
        """Last step with ``time <= t``, or None before the first event."""
        last = None
        for step in self.steps:
            if step.time > t:
                break
            last = step
        return last


@dataclass(frozen=True)
class KMSummaryRow:
    query_time: float
    n_risk: int
    n_event: int
    survival: float
    std_error: float
    ci_lower: float
    ci_upper: float


def fit_km(ds=None, *, times=None, status=None) -> KMCurve:
    """Product-limit estimate for a dataset (or raw ``times``/``status`` arrays).

    Subjects censored at an event time stay in that time's risk set.
    Only event times produce steps; with no events the curve is flat at 1.
    """
    if ds is not None:
        times, status = ds.times, ds.status
    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=int)
    n = len(times)
    if n == 0:
        raise ValueError("empty dataset")
    steps = []
    surv = 1.0
    gw = 0.0
    for t in np.unique(times[status == 1]):
        n_risk = int(np.sum(times >= t))
        d = int(np.sum((times == t) & (status == 1)))
        surv *= 1.0 - d / n_risk
        if n_risk > d:
            gw += d / (n_risk * (n_risk - d))
            se = surv * np.sqrt(gw)
        else:
            # curve drops to zero; Greenwood term is undefined and S*sqrt(.) is 0
            se = 0.0
        steps.append(KMStep(float(t), n_risk, d, surv, float(se)))
    return KMCurve(tuple(steps), n, tuple(float(t) for t in np.sort(times)))


def confidence_interval(survival: float, std_error: float, level: float = 0.95):
    """Log-type interval ``S * exp(+-z * se / S)`` clipped to [0, 1]."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if survival <= 0.0:
        return 0.0, 0.0
    z = norm.ppf((1.0 + level) / 2.0)
    half = z * std_error / survival
    lower = survival * np.exp(-half)
    upper = survival * np.exp(half)
    return float(min(max(lower, 0.0), 1.0)), float(min(max(upper, 0.0), 1.0))


def summarize_at(curve: KMCurve, query_times, level: float = 0.95):
    """Table of the curve at ``query_times``.

    ``n_risk`` counts subjects with observed time at or after each query
    time. ``n_event`` sums events in the window since the previous query
    time (everything up to the first query time for the first row).
    """
    q = [float(t) for t in query_times]
    if any(b <= a for a, b in zip(q, q[1:])):
        raise ValueError("query times must be strictly increasing")
    out = []
    prev = -np.inf
    for t in q:
        n_risk = int(np.sum(np.asarray(curve.observed) >= t)) if curve.observed else 0
        n_event = sum(s.n_event for s in curve.steps if prev < s.time <= t)
        step = curve.step_at(t)
        surv, se = (1.0, 0.0) if step is None else (step.survival, step.std_error)
        lo, hi = confidence_interval(surv, se, level)
        out.append(KMSummaryRow(t, n_risk, n_event, surv, se, lo, hi))
        prev = t
    return out


def format_summary(rows) -> str:
    """Aligned text table with 3-decimal survival and 4-decimal std. error."""
    head = f"{'time':>6} {'n.risk':>7} {'n.event':>8} {'survival':>9} {'std.err':>8} {'lower 95% CI':>13} {'upper 95% CI':>13}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.query_time:>6g} {r.n_risk:>7d} {r.n_event:>8d} {r.survival:>9.3f} "
            f"{r.std_error:>8.4f} {r.ci_lower:>13.3f} {r.ci_upper:>13.3f}"
        )
    return "\n".join(lines)


def curve_points(curve: KMCurve, level: float = 0.95):
    """Step-function points ``(time, survival, lower, upper)`` starting at time 0."""
    pts = [(0.0, 1.0, 1.0, 1.0)]
    for s in curve.steps:
        lo, hi = confidence_interval(s.survival, s.std_error, level)
        pts.append((s.time, s.survival, lo, hi))
    return pts
